import json
import sys

HOOD = "Vehicle.Body.Hood.IsOpen"


def send(frame):
    sys.stdout.write(json.dumps(frame) + "\n")
    sys.stdout.flush()


send({"op": "hello", "version": 1})
sys.stdin.readline()
send({"op": "subscribe", "path": HOOD})
for line in sys.stdin:
    frame = json.loads(line)
    if frame["op"] == "signal_update":
        send({"op": "set_target", "path": HOOD, "value": False})
        send({"op": "set_target", "path": "Vehicle.Body.Windshield.Front.Wiping.Mode", "value": 0})
    elif frame["op"] == "shutdown":
        break
