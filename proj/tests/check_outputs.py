#!/usr/bin/env python3
"""Runs every CLI command on a small config and checks the artifacts.

JSON files are validated against schemas/, CSV headers are compared with the
documented ones, SVG files must parse as XML, manifest hashes must match the
bytes on disk, and error paths must give the documented exit codes.

usage: check_outputs.py <specrecon binary> <schemas dir> <test data dir>
"""

import csv
import hashlib
import json
import pathlib
import subprocess
import sys
import tempfile
import xml.etree.ElementTree as ET

import jsonschema
from referencing import Registry, Resource

CSV_HEADERS = {
    "report.csv": "index,sample,estimate,truth,raw_rel_err,recon_rel_err,valid",
    "checks.csv": "check,passed,value,threshold",
    "scaling.csv": "c,n,mean_abs_diff,median_a",
    "density.csv": "x,density",
    "fixed_point_density.csv": "x,density",
    "locality.csv": "index,mean_ratio,median_ratio",
    "spectrum.csv": "eigenvalue",
    "truth.csv": "eigenvalue",
}

JSON_SCHEMAS = {
    "manifest.json": "urn:specrecon:manifest",
    "summary.json": "urn:specrecon:summary",
    "report.json": "urn:specrecon:report",
    "ensemble.json": "urn:specrecon:ensemble",
}

SMALL = {
    "simulate": ["p=20", "trials=3"],
    "reconstruct": ["p=40", "trials=3"],
    "validate": ["p=30", "trials=2"],
    "scaling": ["p=40", "trials=2", "c_values=2,4,8"],
    "mp-compare": ["p=60", "trials=2", "model=identity"],
    "insert": ["p=40", "c=10", "trials=2"],
}

failures = []


def check(cond, msg):
    if not cond:
        failures.append(msg)
        print("FAIL", msg)


def load_registry(schema_dir):
    resources = []
    schemas = {}
    for path in sorted(schema_dir.glob("*.schema.json")):
        doc = json.loads(path.read_text())
        jsonschema.Draft202012Validator.check_schema(doc)
        resources.append((doc["$id"], Resource.from_contents(doc)))
        schemas[doc["$id"]] = doc
    return Registry().with_resources(resources), schemas


def validate(registry, schemas, urn, instance, what):
    validator = jsonschema.Draft202012Validator(schemas[urn], registry=registry)
    errors = sorted(validator.iter_errors(instance), key=lambda e: list(e.path))
    for e in errors[:5]:
        check(False, f"{what}: {'/'.join(map(str, e.path))}: {e.message}")


def run(binary, args, cwd):
    return subprocess.run([binary, *args], cwd=cwd, capture_output=True, text=True)


def main():
    binary, schema_dir, data_dir = str(pathlib.Path(sys.argv[1]).resolve()), pathlib.Path(sys.argv[2]), pathlib.Path(sys.argv[3])
    registry, schemas = load_registry(schema_dir)

    validate(registry, schemas, "urn:specrecon:secular_problem",
             json.loads((data_dir / "secular_problem.json").read_text()), "secular_problem.json")
    validate(registry, schemas, "urn:specrecon:spectrum",
             json.loads((data_dir / "spectrum.json").read_text()), "spectrum.json")

    with tempfile.TemporaryDirectory() as tmp:
        tmp = pathlib.Path(tmp)
        for command, sets in SMALL.items():
            out = tmp / command
            args = [command, "--out", str(out), "--set", "seed=3"]
            for s in sets:
                args += ["--set", s]
            proc = run(binary, args, tmp)
            check(proc.returncode == 0, f"{command}: exit {proc.returncode}: {proc.stderr.strip()}")
            if proc.returncode != 0:
                continue
            check(json.loads(proc.stdout) == json.loads((out / "summary.json").read_text())["result"],
                  f"{command}: stdout differs from summary.json result")
            manifest = json.loads((out / "manifest.json").read_text())
            listed = {f["path"] for f in manifest["files"]}
            on_disk = {p.name for p in out.iterdir()} - {"manifest.json"}
            check(listed == on_disk, f"{command}: manifest lists {sorted(listed)}, disk has {sorted(on_disk)}")
            for f in manifest["files"]:
                blob = (out / f["path"]).read_bytes()
                check(len(blob) == f["bytes"], f"{command}/{f['path']}: byte count")
                check(hashlib.sha256(blob).hexdigest() == f["sha256"], f"{command}/{f['path']}: sha256")
            for path in sorted(out.iterdir()):
                name = path.name
                if name in JSON_SCHEMAS:
                    validate(registry, schemas, JSON_SCHEMAS[name], json.loads(path.read_text()),
                             f"{command}/{name}")
                elif name.endswith(".csv") and name != "data.csv":
                    with path.open(newline="") as fh:
                        rows = list(csv.reader(fh))
                    check(",".join(rows[0]) == CSV_HEADERS.get(name),
                          f"{command}/{name}: header {rows[0]}")
                    check(all(len(r) == len(rows[0]) for r in rows), f"{command}/{name}: ragged rows")
                elif name.endswith(".svg"):
                    try:
                        root = ET.parse(path).getroot()
                        check(root.tag.endswith("svg"), f"{command}/{name}: root is {root.tag}")
                    except ET.ParseError as e:
                        check(False, f"{command}/{name}: {e}")

            # Same config again, same directory: byte-identical manifest.
            first = (out / "manifest.json").read_bytes()
            run(binary, args, tmp)
            check((out / "manifest.json").read_bytes() == first,
                  f"{command}: manifest differs between identical runs")

        # Exit codes.
        bad_cfg = tmp / "bad.cfg"
        bad_cfg.write_text("p = 10\nc = -1\n")
        blocker = tmp / "blocker"
        blocker.write_text("x")
        cases = [
            (["plot"], 2),
            (["validate", "--config", str(bad_cfg)], 2),
            (["validate", "--set", "colour=red"], 2),
            (["validate", "--config", str(tmp / "missing.cfg")], 4),
            (["simulate", "--set", "p=5", "--out", str(blocker / "sub")], 4),
            (["insert", "--set", "p=10", "--set", "insert_index=11", "--out", str(tmp / "oob")], 3),
        ]
        for args, code in cases:
            proc = run(binary, args, tmp)
            check(proc.returncode == code, f"{' '.join(args)}: exit {proc.returncode}, expected {code}")
        proc = run(binary, ["validate", "--config", str(bad_cfg)], tmp)
        check("'c'" in proc.stderr, f"config error does not name the key: {proc.stderr.strip()}")

    print("checked outputs:", "ok" if not failures else f"{len(failures)} failures")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
