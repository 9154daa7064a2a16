#!/usr/bin/env python3
"""Re-derives the golden plans from the committed fixtures and compares.

usage: check_plans.py DATA_DIR
"""
import json
import os
import sys

from draw_plan import plan


def main():
    data = sys.argv[1]
    with open(os.path.join(data, "golden", "plans.json"), encoding="utf-8") as f:
        golden = json.load(f)
    failures = 0
    for task, entry in sorted(golden.items()):
        with open(os.path.join(data, "fixtures", entry["corpus"]), encoding="utf-8") as f:
            ids = [json.loads(line)["id"] for line in f if line.strip()]
        shots = 2 if task == "TCREE" else 1
        for expected in entry["plans"]:
            got = plan(ids, shots, expected["seed"], expected.get("sample_count"))
            if got["exemplar_ids"] != expected["exemplar_ids"] or got["drawn_ids"] != expected["drawn_ids"]:
                print(f"mismatch: {task} seed {expected['seed']}")
                failures += 1
    print(f"{sum(len(e['plans']) for e in golden.values()) - failures} plans match")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
