import json
import sys

sys.stdout.write(json.dumps({"op": "hello", "version": 99}) + "\n")
sys.stdout.flush()
sys.stdin.readline()
