import asyncio
import vehicle
from sdv.vehicle_app import VehicleApp


class WiperControlApp(VehicleApp):
    async def on_start(self):
        await vehicle.Body.Hood.IsOpen.subscribe(self.on_hood)

    async def on_hood(self, reply):
        if reply.value:
            await vehicle.Body.Windshield.Front.Wiping.Mode.set_target("OFF")


asyncio.run(WiperControlApp().run())
