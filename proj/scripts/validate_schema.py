#!/usr/bin/env python3
"""Validate encoded messages against docs/protocol-v1.schema.json.

Every line of the corpus must validate, and each hand-written bad message
must be rejected. Exits 77 when jsonschema is unavailable.
"""
import json
import sys
from pathlib import Path

try:
    import jsonschema
except ImportError:
    print("jsonschema not installed; skipping")
    sys.exit(77)

BAD = [
    {"v": 2, "kind": "ping", "seq": 0, "payload": {"nonce": 1}},
    {"v": 1, "kind": "nope", "seq": 0, "payload": {}},
    {"v": 1, "kind": "ping", "seq": 0, "payload": {}},
    {"v": 1, "kind": "ping", "seq": 0, "payload": {"nonce": 1}, "extra": 1},
    {"v": 1, "kind": "join_request", "seq": 0, "session": "42", "payload": {"role": "headset"}},
    {"v": 1, "kind": "delta", "seq": 0, "payload": {"updates": [{"path": "channels.01.color", "value": [1, 2, 3]}]}},
    {"v": 1, "kind": "delta", "seq": 0, "payload": {"updates": [{"path": "channels.0.color", "value": [1, 2, 300]}]}},
    {"v": 1, "kind": "delta", "seq": 0, "payload": {"updates": [{"path": "transform", "value": {"t": [0, 0, 0]}}]}},
    {"v": 1, "kind": "delta", "seq": 0, "payload": {"updates": [{"path": "selection", "value": None}]}},
    {"v": 1, "kind": "delta", "seq": 0, "payload": {"updates": [{"path": "bogus", "value": 1}]}},
]


def main() -> int:
    root = Path(__file__).resolve().parent.parent
    schema = json.loads((root / "docs" / "protocol-v1.schema.json").read_text())
    validator = jsonschema.Draft202012Validator(schema)
    failures = 0
    lines = Path(sys.argv[1]).read_text().splitlines()
    for n, line in enumerate(lines, 1):
        errors = list(validator.iter_errors(json.loads(line)))
        if errors:
            failures += 1
            if failures <= 5:
                print(f"line {n}: {errors[0].message} at {list(errors[0].absolute_path)}")
    for msg in BAD:
        if validator.is_valid(msg):
            failures += 1
            print(f"accepted bad message: {json.dumps(msg)}")
    print(f"{len(lines)} encoded messages, {len(BAD)} bad samples, {failures} failures")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
