import asyncio
import signal
from sdv.vdb.reply import DataPointReply
from sdv.vehicle_app import VehicleApp
from vehicle import Vehicle, vehicle

class HoodWiperController(VehicleApp):
    def __init__(self, vehicle_client: Vehicle):
        super().__init__()

    async def on_start(self):
        await self.vehicle.Body.Hood.IsOpen.subscribe(self.on_hood)

    async def on_hood(self, reply: DataPointReply):
        if reply.get(self.vehicle.Body.Hood.IsOpen).value:
            await self.vehicle.Body.Windshield.Front.Wiping.Mode.set_target("OFF")


async def main():
    await HoodWiperController(vehicle).run()

asyncio.run(main())
