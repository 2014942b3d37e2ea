import json
import sys
import time

sys.stdout.write(json.dumps({"op": "hello", "version": 1}) + "\n")
sys.stdout.flush()
while True:
    time.sleep(1)
