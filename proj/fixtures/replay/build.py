"""Regenerates the replay fixtures: scripted responses, recorded runs, transcripts.

Usage: python3 fixtures/replay/build.py <path-to-halbench-binary>
"""
import hashlib
import json
import os
import subprocess
import sys

HERE = os.path.dirname(os.path.abspath(__file__))
HOOD = "Vehicle.Body.Hood.IsOpen"
MODE = "Vehicle.Body.Windshield.Front.Wiping.Mode"
SYSTEM_MODE = "Vehicle.Body.Windshield.Front.Wiping.System.Mode"
NON_ACTUATOR = "set target value for non-actuator is not allowed"


def frame(tick, direction, op, **fields):
    record = {"tick": tick, "dir": direction, "op": op}
    record.update(fields)
    return record


def opening():
    log = [
        frame(0, "guest", "hello", message="1"),
        frame(0, "harness", "hello_ack", message="1"),
        frame(0, "guest", "subscribe", path=HOOD),
        frame(2, "harness", "signal_update", path=HOOD, value=True),
    ]
    return log


def shutdown_at(tick):
    return [frame(tick, "harness", "shutdown")]


def traceback(code, needle, last_line):
    line = next(i for i, text in enumerate(code.splitlines(), 1) if needle in text)
    return (
        "Traceback (most recent call last):\n"
        '  File "/tmp/halbench-run/guest.py", line %d, in on_hood_changed\n'
        "    %s\n%s\n" % (line, needle.strip(), last_line)
    )


def run_pass(code):
    log = opening() + [frame(2, "guest", "set_target", path=MODE, value="OFF")]
    return {"event_log": log + shutdown_at(2), "exit_status": 0, "stderr": ""}


def run_quiet(code, writes=()):
    log = opening() + [frame(2, "guest", "set_target", path=p, value=v) for p, v in writes]
    return {"event_log": log + shutdown_at(13), "exit_status": 0, "stderr": ""}


def run_sensor_write(code):
    log = opening() + [frame(2, "guest", "set_target", path=HOOD, value=False)]
    error = traceback(code, "IsOpen.set_target(False)",
                      "sdv.vehicle_app.VehicleDataError: " + NON_ACTUATOR)
    return {"event_log": log, "exit_status": 1, "stderr": error}


def run_type_error(code):
    error = traceback(code, "Mode.set_target(0)",
                      "TypeError: setting int for string variable " + MODE)
    return {"event_log": opening(), "exit_status": 1, "stderr": error}


FIXTURES = {
    "actuator_repair": [
        ("it0.py", run_sensor_write),
        ("it1.py", lambda code: run_quiet(code, [(SYSTEM_MODE, "STOP_HOLD")])),
        ("it2.py", run_pass),
    ],
    "type_repair": [
        ("it0.py", run_type_error),
        ("it1.py", run_pass),
    ],
    "refused_repair": [
        ("it0.py", lambda code: run_quiet(code, [(SYSTEM_MODE, "STOP_HOLD")])),
        ("it1.py", run_quiet),
        ("refusal.txt", None),
    ],
    "never_parses": [("it%d.py" % i, None) for i in range(5)],
}


def respond(name, text):
    if name.endswith(".txt"):
        return text.strip()
    return "Here is the program.\n\n```python\n" + text + "```\n"


def main(binary):
    for fixture, steps in FIXTURES.items():
        directory = os.path.join(HERE, fixture)
        responses = []
        runs = []
        for name, make_run in steps:
            with open(os.path.join(directory, name)) as handle:
                text = handle.read()
            responses.append(respond(name, text))
            if make_run:
                run = make_run(text)
                run["code_digest"] = hashlib.sha256(text.encode()).hexdigest()
                runs.append(run)
        with open(os.path.join(directory, "responses.json"), "w") as handle:
            json.dump(responses, handle, indent=2)
            handle.write("\n")
        with open(os.path.join(directory, "recorded_runs.jsonl"), "w") as handle:
            for run in runs:
                handle.write(json.dumps(run, sort_keys=True) + "\n")

        with open(os.path.join(directory, "config.json")) as handle:
            config = json.load(handle)
        config["gateway_mode"] = "record"
        config["provider"] = {"kind": "scripted", "responses": "responses.json"}
        config.pop("report", None)
        record_config = os.path.join(directory, ".record.json")
        with open(record_config, "w") as handle:
            json.dump(config, handle, indent=2)
        transcript = os.path.join(directory, config["transcript"])
        if os.path.exists(transcript):
            os.remove(transcript)
        try:
            result = subprocess.run([binary, "run", "--config", record_config],
                                    stdout=subprocess.DEVNULL)
        finally:
            os.remove(record_config)
        print("%s: exit %d" % (fixture, result.returncode))


if __name__ == "__main__":
    main(sys.argv[1])
