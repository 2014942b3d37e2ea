import asyncio
import signal
from sdv.model import vehicle
from sdv.vdb.reply import DataPointReply
from sdv.vehicle_app import VehicleApp
from vehicle import Vehicle

class WiperControlApp(VehicleApp):
    def __init__(self, vehicle_client: Vehicle):
        super().__init__()
        self.vehicle = vehicle_client

    async def on_start(self):
        await self.vehicle.Body.Hood.IsOpen.subscribe(self.on_hood)

    async def on_hood(self, reply: DataPointReply):
        if reply.get(self.vehicle.Body.Hood.IsOpen).value:
            await self.vehicle.Body.Windshield.Front.Wiping.Mode.set_target("OFF")

async def main():
    app = WiperControlApp(vehicle)
    await app.run()

LOOP = asyncio.get_event_loop()
LOOP.add_signal_handler(signal.SIGTERM, LOOP.stop)
LOOP.run_until_complete(main())
LOOP.close()
