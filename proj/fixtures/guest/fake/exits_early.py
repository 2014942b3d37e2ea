import json
import sys

sys.stdout.write(json.dumps({"op": "hello", "version": 1}) + "\n")
sys.stdout.flush()
sys.stdin.readline()
raise TypeError("setting int for string variable Vehicle.Body.Windshield.Front.Wiping.Mode")
