#!/usr/bin/env python3
"""End-to-end checks of the mixdec CLI: exit codes, output files, schemas.

usage: cli_test.py <mixdec> <models dir> <schemas dir> <scratch dir>
"""
import json
import shutil
import subprocess
import sys
from pathlib import Path

import jsonschema

CLI, MODELS, SCHEMAS, OUT = sys.argv[1], Path(sys.argv[2]), Path(sys.argv[3]), Path(sys.argv[4])
failures = []


def check(cond, what):
    print(("PASS " if cond else "FAIL ") + what)
    if not cond:
        failures.append(what)


def run(*args):
    p = subprocess.run([CLI, "--quiet", *map(str, args)], capture_output=True, text=True, timeout=300)
    return p.returncode, p.stdout, p.stderr


def validate(path, schema):
    s = json.loads((SCHEMAS / f"{schema}.schema.json").read_text())
    doc = json.loads(Path(path).read_text())
    errs = sorted(jsonschema.Draft202012Validator(s).iter_errors(doc), key=lambda e: list(e.path))
    for e in errs[:3]:
        print(f"  {path}: {list(e.path)}: {e.message}")
    return not errs


def ok_run(name, schema, report, *args):
    out = OUT / name
    code, _, err = run(*args, "--out-dir", out)
    check(code == 0, f"{name}: exit 0" + (f" ({err.strip()})" if code else ""))
    if code:
        return out
    check(validate(out / report, schema), f"{name}: {report} matches {schema} schema")
    check(validate(out / "manifest.json", "manifest"), f"{name}: manifest matches schema")
    man = json.loads((out / "manifest.json").read_text())
    check(all((out / f).is_file() for f in man["outputs"]), f"{name}: every listed output exists")
    return out


shutil.rmtree(OUT, ignore_errors=True)
OUT.mkdir(parents=True)

code, stdout, _ = run("--version")
check(code == 0 and stdout.strip() != "", "--version prints a version")

ok_run("decompose", "decompose", "decompose.json", "decompose", MODELS / "doubling.toml", "--depth", "6")
ok_run("decompose_swap", "decompose", "decompose.json", "decompose", MODELS / "swap.toml", "--depth", "6")
ok_run("decompose_cube", "decompose", "decompose.json", "decompose", MODELS / "cube3.toml", "--depth", "3")
ok_run("orbits", "orbits", "orbits.json", "orbits", MODELS / "cat.toml", "--max-period", "2")
ok_run("homoclinic", "homoclinic", "homoclinic.json", "homoclinic", MODELS / "cat.toml", "--orbit-id", "0",
       "--nmax", "3")
pair = ok_run("homoclinic_pair", "homoclinic", "homoclinic.json", "homoclinic", MODELS / "cat.toml", "--orbit-id", "0",
              "--partner", "1", "--max-period", "2", "--nmax", "2")
if (pair / "homoclinic.json").exists():
    check("cycle" in json.loads((pair / "homoclinic.json").read_text()), "homoclinic_pair: cycle verdict reported")
ok_run("kset", "kset", "kset.json", "kset", MODELS / "doubling.toml", "--ell", "2", "--max-period", "3")
su = ok_run("surgery", "surgery", "surgery.json", "surgery", "--seed", "7", "--ell", "3")
check(validate(su / "instance.json", "instance"), "surgery: instance.json matches instance schema")
su2 = ok_run("surgery_replay", "surgery", "surgery.json", "surgery", su / "instance.json", "--ell", "3")
a = json.loads((su / "surgery.json").read_text())["result"]
b = json.loads((su2 / "surgery.json").read_text())["result"]
check(a == b, "surgery: replaying the written instance gives the same result")
ok_run("validate", "validate-domain", "validate-domain.json", "validate-domain", su / "instance.json")
ok_run("close", "close", "close.json", "close", MODELS / "rotation3_close.toml", "--point", "0.05", "--ell", "2",
       "--budget", "20")

# determinism: only the manifest timestamps may differ
d1 = ok_run("det1", "decompose", "decompose.json", "decompose", MODELS / "rotation4.toml", "--depth", "2")
d2 = ok_run("det2", "decompose", "decompose.json", "decompose", MODELS / "rotation4.toml", "--depth", "2")
same = all((d1 / f).read_bytes() == (d2 / f).read_bytes() for f in ("decompose.json", "transitions.dot", "covering.svg"))
check(same, "decompose: repeated runs are byte-identical")

code, _, _ = run("decompose", MODELS / "doubling.toml", "--depth", "4", "--format", "csv", "--out-dir", OUT / "csv")
csvs = list((OUT / "csv").glob("*.csv")) if code == 0 else []
check(code == 0 and csvs and not (OUT / "csv" / "decompose.json").exists(), "decompose --format csv writes csv")
if csvs:
    check(csvs[0].read_text().count("\n") > 1, "decompose --format csv has data rows")

# usage errors: exit 1, nothing written
for name, args in [
    ("missing config", ["decompose", OUT / "nope.toml"]),
    ("unknown flag", ["orbits", MODELS / "cat.toml", "--bogus"]),
    ("bad format", ["orbits", MODELS / "cat.toml", "--format", "xml"]),
    ("no subcommand", []),
    ("surgery without input", ["surgery"]),
    ("wrong point dimension", ["close", MODELS / "rotation3_close.toml", "--point", "0.1,0.2", "--ell", "2",
                               "--budget", "5"]),
]:
    target = OUT / ("err_" + name.replace(" ", "_"))
    code, _, err = run(*args, "--out-dir", target)
    check(code == 1, f"{name}: exit 1 (got {code})")
    check(not target.exists(), f"{name}: no output directory")

# a broken perturbation domain is a certificate failure: exit 3, report still written
inst = json.loads((su / "instance.json").read_text())
inst["domain"]["tiles"].append(dict(inst["domain"]["tiles"][0]))
bad = OUT / "bad_instance.json"
bad.write_text(json.dumps(inst))
code, _, _ = run("validate-domain", bad, "--out-dir", OUT / "bad")
check(code == 3, f"invalid domain: exit 3 (got {code})")
if (OUT / "bad" / "validate-domain.json").exists():
    rep = json.loads((OUT / "bad" / "validate-domain.json").read_text())
    check(not rep["domain"]["valid"] and rep["domain"]["violations"], "invalid domain: violations reported")
    man = json.loads((OUT / "bad" / "manifest.json").read_text())
    check(man["exit_code"] == 3, "invalid domain: manifest records exit code 3")
else:
    check(False, "invalid domain: report written")

print(f"{len(failures)} failure(s)")
sys.exit(1 if failures else 0)
