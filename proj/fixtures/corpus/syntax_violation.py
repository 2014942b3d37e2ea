import asyncio
import signal
from sdv.vdb.reply import DataPointReply
from sdv.vehicle_app import VehicleApp
from vehicle import Vehicle, vehicle

class WiperControlApp(VehicleApp)
    async def on_start(self):
        pass
