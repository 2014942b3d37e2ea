import json
import sys

print("starting wiper app")
sys.stdout.write(json.dumps({"op": "hello", "version": 1}) + "\n")
sys.stdout.flush()
sys.stdin.readline()
sys.stdout.write(json.dumps({"op": "value", "path": "Vehicle.Body.Hood.IsOpen", "value": 1}) + "\n")
sys.stdout.flush()
for line in sys.stdin:
    if json.loads(line)["op"] == "shutdown":
        break
