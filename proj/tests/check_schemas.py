#!/usr/bin/env python3
"""Runs CLI subcommands with --format json and validates each output."""
import json
import subprocess
import sys
from pathlib import Path

import jsonschema

cli, schemas, fixtures = sys.argv[1], Path(sys.argv[2]), Path(sys.argv[3])

CASES = [
    ("parse", ["parse", fixtures / "turing_words.sass"]),
    ("parse", ["parse", "--arch", "P100", "--controls", fixtures / "pascal_bundle.sass"]),
    ("decode-ctl", ["decode-ctl", "--arch", "pascal", "0x000f8800fe2007f1"]),
    ("decode-ctl", ["decode-ctl", "--arch", "K80", "0x0088000000000000"]),
    ("encode-ctl", ["encode-ctl", "--stall", "2", "--yield", "0", "--read", "3"]),
    ("banks", ["banks", "--arch", "V100", fixtures / "volta_hmma884.sass"]),
    ("reassign", ["reassign", fixtures / "saxpy_improved.sass"]),
    ("schedule", ["schedule", fixtures / "turing_words.sass"]),
    ("multiwarp", ["multiwarp", "--warps", "0,4,1", fixtures / "saxpy_improved.sass"]),
    ("pchase", ["memsim", "pchase", "--array-bytes", "16KiB", "--stride", "64"]),
    ("icache-sweep", ["memsim", "icache-sweep", "--max-bytes", "128KiB"]),
    ("aggressor-victim", ["memsim", "aggressor-victim", "--aggressor", "48KiB", "--victim", "24KiB"]),
    ("shared", ["memsim", "shared"]),
    ("const", ["memsim", "const", "--count", "4", "--aggressor-bytes", "64KiB", "--victim-bytes", "4KiB"]),
    ("lint", ["lint", fixtures / "saxpy_cublas.sass"]),
    ("profiles-list", ["profiles", "list"]),
    ("profile", ["profiles", "show", "T4"]),
    ("profiles-validate", ["profiles", "validate", "P4"]),
]

failures = 0
for schema_name, args in CASES:
    schema = json.loads((schemas / f"{schema_name}.schema.json").read_text())
    cmd = [cli, *map(str, args), "--format", "json"]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    label = " ".join(map(str, args[:2]))
    if proc.returncode not in (0, 3):
        print(f"FAIL {label}: exit {proc.returncode}: {proc.stderr.strip()}")
        failures += 1
        continue
    try:
        jsonschema.validate(json.loads(proc.stdout), schema)
        print(f"ok   {label}")
    except (json.JSONDecodeError, jsonschema.ValidationError) as e:
        print(f"FAIL {label}: {str(e).splitlines()[0]}")
        failures += 1

err = subprocess.run([cli, "parse", "--arch", "T4"], input="FADD R0, R1 R2 ;\n",
                     capture_output=True, text=True)
try:
    jsonschema.validate(json.loads(err.stderr.splitlines()[0]),
                        json.loads((schemas / "error.schema.json").read_text()))
    print("ok   error diagnostic")
except Exception as e:  # noqa: BLE001
    print(f"FAIL error diagnostic: {e}")
    failures += 1

sys.exit(1 if failures else 0)
