import json
import sys

HOOD = "Vehicle.Body.Hood.IsOpen"
MODE = "Vehicle.Body.Windshield.Front.Wiping.Mode"


def send(frame):
    sys.stdout.write(json.dumps(frame) + "\n")
    sys.stdout.flush()


send({"op": "hello", "version": 1})
ack = json.loads(sys.stdin.readline())
assert ack["op"] == "hello_ack" and ack["scenario"] == "hood-open-wipers-off"
send({"op": "subscribe", "path": HOOD})
send({"op": "get", "path": HOOD, "id": 7})
for line in sys.stdin:
    frame = json.loads(line)
    if frame["op"] == "signal_update" and frame["path"] == HOOD and frame["value"]:
        send({"op": "set_target", "path": MODE, "value": "OFF"})
    elif frame["op"] == "shutdown":
        break
