import json
import os
import sys
import time

child = os.fork()
if child == 0:
    os.close(1)
    os.close(0)
    while True:
        time.sleep(1)
with open("child.pid", "w") as out:
    out.write(str(child))
sys.stdout.write(json.dumps({"op": "hello", "version": 1}) + "\n")
sys.stdout.write(json.dumps({"op": "log", "level": "info", "message": "child %d" % child}) + "\n")
sys.stdout.flush()
sys.stdin.readline()
while True:
    time.sleep(1)
