import asyncio
from sdv import SDVApp
from vehicle import vehicle


class WiperControlApp(SDVApp):
    async def on_start(self):
        await vehicle.Body.Hood.IsOpen.subscribe(self.on_hood)

    async def on_hood(self, reply):
        if reply.value:
            await vehicle.Body.Windshield.Front.Wiping.Mode.set_target("OFF")


asyncio.run(WiperControlApp().run())
