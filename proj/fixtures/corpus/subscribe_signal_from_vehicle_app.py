import asyncio
from sdv.vehicle_app import VehicleApp, subscribe_signal
from vehicle import Vehicle, vehicle

class WiperControlApp(VehicleApp):
    def __init__(self, vehicle_client: Vehicle):
        super().__init__()
        self.vehicle = vehicle_client

    async def on_start(self):
        await self.vehicle.Body.Hood.IsOpen.subscribe(self.on_hood)

    async def on_hood(self, reply: DataPointReply):
        if reply.get(self.vehicle.Body.Hood.IsOpen).value:
            await self.vehicle.Body.Windshield.Front.Wiping.Mode.set_target("OFF")

    @subscribe_signal("Vehicle.Body.Hood.IsOpen")
    async def hood_changed(self, value):
        pass

asyncio.run(WiperControlApp(vehicle).run())
