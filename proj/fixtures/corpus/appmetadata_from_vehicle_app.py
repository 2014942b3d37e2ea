import asyncio
from sdv.vehicle_app import AppMetadata, VehicleApp
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

METADATA = AppMetadata(name="wiper-control")
asyncio.run(WiperControlApp(vehicle).run())
