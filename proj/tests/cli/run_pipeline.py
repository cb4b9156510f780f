#!/usr/bin/env python3
# Copyright 2026 The moecollab Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""End-to-end run of every CLI subcommand, with schema validation.

usage: run_pipeline.py <moecollab executable> <schemas dir> <work dir>
"""

import hashlib
import json
import math
import pathlib
import shutil
import struct
import subprocess
import sys

import jsonschema

EXE, SCHEMAS, WORK = sys.argv[1], pathlib.Path(sys.argv[2]), pathlib.Path(sys.argv[3])
FAILURES = []


def check(cond, what):
    print(("ok   " if cond else "FAIL ") + what)
    if not cond:
        FAILURES.append(what)


def run(*args, expect_ok=True):
    proc = subprocess.run([EXE, *map(str, args)], capture_output=True, text=True)
    if expect_ok and proc.returncode != 0:
        print(proc.stderr, file=sys.stderr)
        raise SystemExit(f"command failed: {args}")
    return proc


def load(path):
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def validate(path, schema_name):
    schema = load(SCHEMAS / f"{schema_name}.schema.json")
    try:
        jsonschema.validate(load(path), schema)
        check(True, f"{path.name} matches {schema_name} schema")
    except jsonschema.ValidationError as e:
        check(False, f"{path.name} matches {schema_name} schema: {e.message}")


def validate_manifest(out_dir, command):
    path = out_dir / f"{command}.manifest.json"
    validate(path, "manifest")
    for entry in load(path)["inputs"]:
        digest = hashlib.sha256(pathlib.Path(entry["path"]).read_bytes()).hexdigest()
        check(digest == entry["sha256"], f"{command} manifest digest of {pathlib.Path(entry['path']).name}")


def write_moeact_tokens(path, m, n, samples):
    """samples: list of token lists; each token is a list of m*n floats."""
    out = bytearray(b"MOEA")
    out += struct.pack("<IB3xIII", 1, 1, len(samples), m, n)
    for tokens in samples:
        out += struct.pack("<I", len(tokens))
    for tokens in samples:
        for tok in tokens:
            out += struct.pack(f"<{m * n}f", *tok)
    path.write_bytes(bytes(out))


def main():
    shutil.rmtree(WORK, ignore_errors=True)
    WORK.mkdir(parents=True)

    # synth
    synth = WORK / "synth"
    run("synth", "--seed", 3, "--output-dir", synth)
    act = synth / "activations.moeact"
    raw = act.read_bytes()
    check(raw[:4] == b"MOEA" and struct.unpack("<I", raw[4:8])[0] == 1, "synth writes a MOEACT v1 file")
    ns, m, n = struct.unpack("<III", raw[12:24])
    check((ns, m, n) == (500, 1, 64) and len(raw) == 24 + 4 * ns * m * n, "synth MOEACT size")
    validate(synth / "ground_truth.json", "ground_truth")
    validate_manifest(synth, "synth")

    # learn, twice with the same seed
    runs = []
    for tag in ("a", "b"):
        out = WORK / f"learn_{tag}"
        run("learn", "--input", act, "--seed", 11, "--np", "8,16", "--output-dir", out)
        runs.append(out / "hierarchy.json")
    check(runs[0].read_bytes() == runs[1].read_bytes(), "learn is byte-identical across reruns")
    hier = runs[0]
    validate(hier, "hierarchy")
    validate_manifest(WORK / "learn_a", "learn")
    levels = load(hier)["levels"]
    check([lv["Np"] for lv in levels] == [8, 16], "learn honours --np")

    # mine
    mine = WORK / "mine"
    run("mine", "--input", act, "--order", 2, "--output-dir", mine)
    table = mine / "coactivation.json"
    validate(table, "coactivation")
    validate_manifest(mine, "mine")
    check(len(load(table)["entries"]) == 64 * 63 // 2, "mine enumerates all pairs")

    # coverage
    cov = WORK / "coverage"
    run("coverage", "--input", hier, "--table", table, "--top-percent", 10, "--output-dir", cov)
    validate(cov / "coverage.json", "coverage")
    validate_manifest(cov, "coverage")

    # profiles
    labels = WORK / "labels.jsonl"
    labels.write_text("".join(json.dumps({"sample": i, "domain": ["math", "law", "code"][i % 3]}) + "\n"
                              for i in range(ns)))
    prof = WORK / "profiles"
    run("profiles", "--input", act, "--labels", labels, "--output-dir", prof)
    validate(prof / "profiles.json", "profiles")
    validate_manifest(prof, "profiles")
    check(load(prof / "profiles.json")["domains"] == ["code", "law", "math"], "profiles lists sorted domains")

    # prune with k2 = 0.25
    pr = WORK / "prune"
    run("prune", "--input", hier, "--k1", 0.5, "--k2", 0.25, "--output-dir", pr)
    mask = load(pr / "mask.json")
    validate(pr / "mask.json", "mask")
    validate_manifest(pr, "prune")
    check(len(mask["kept"]) <= math.ceil(0.75 * 64), "prune respects the cardinality bound")
    check(mask["kept"] == [i for i, v in enumerate(mask["mask"]) if v], "prune kept list matches mask")

    # annotate a small token file
    tokens = WORK / "tokens.moeact"
    def one_hot(*idx):
        v = [0.0] * 64
        for i in idx:
            v[i] = 1.0 / len(idx)
        return v
    write_moeact_tokens(tokens, 1, 64, [[one_hot(0, 1), one_hot(5), [0.0] * 64], [one_hot(7, 9, 11)]])
    text = WORK / "tokens.jsonl"
    text.write_text(json.dumps({"sample": 0, "tokens": ["a", "<b>", "c"]}) + "\n" +
                    json.dumps({"sample": 1, "tokens": ["d"]}) + "\n")
    ann = WORK / "annotate"
    run("annotate", "--input", tokens, "--hierarchy", hier, "--tokens", text, "--output-dir", ann)
    validate(ann / "annotation.json", "annotation")
    validate_manifest(ann, "annotate")
    a = load(ann / "annotation.json")
    check([len(s) for s in a["assignments"]] == [3, 1], "annotate assigns every token")
    check(a["assignments"][0][2] == -1, "annotate leaves the zero token unassigned")
    html = (ann / "annotation.html").read_text()
    check("&lt;b&gt;" in html and "unassigned" in html and "atom-" in html, "annotation HTML")
    check("\x1b[" in (ann / "annotation.txt").read_text(), "annotation ANSI text")

    # report on the worked 3-expert example
    worked = WORK / "worked_hierarchy.json"
    worked.write_text(json.dumps({
        "format": "moecollab.hierarchy", "version": 1, "source_dims": [3, 2], "num_layers": 1,
        "experts_per_layer": 3, "experts": [[0, 0], [0, 1], [0, 2]],
        "levels": [{"k": 1, "Np": 2, "R_cols": 2, "D": [1, 0, 0, 1, 0.5, 0.5], "R": [1, 1, 0, 1],
                    "loss_trace": [0.0], "iterations": 0, "converged": True}]}))
    rep = WORK / "report"
    run("report", "--input", worked, "--k1", 0.34, "--k2", 0.5, "--output-dir", rep)
    r = load(rep / "report.json")
    validate(rep / "report.json", "report")
    validate_manifest(rep, "report")
    check(r["e"] == [2.0, 1.0, 1.5], "report e = [2, 1, 1.5]")
    check(r["r_sum"] == [2.0, 1.0], "report R_sum = [2, 1]")
    check(r["mask"]["mask"] == [1, 0, 0] and r["mask"]["trace"] == [2], "report mask and trace")
    page = (rep / "report.html").read_text()
    check(all(f"<td>{v}</td>" in page for v in ("2", "1", "1.5")), "report HTML has the e table")

    # error paths
    bad = WORK / "bad.moeact"
    bad.write_bytes(b"XXXX" + raw[4:])
    p = run("mine", "--input", bad, "--output-dir", WORK / "bad", expect_ok=False)
    check(p.returncode != 0 and "error[bad_magic]" in p.stderr, "bad magic is reported by category")
    trunc = WORK / "trunc.moeact"
    trunc.write_bytes(raw[:-3])
    p = run("learn", "--input", trunc, "--output-dir", WORK / "bad", expect_ok=False)
    check(p.returncode != 0 and "error[truncated]" in p.stderr, "truncation is reported by category")
    p = run("prune", "--input", hier, "--bogus", 1, expect_ok=False)
    check(p.returncode != 0 and "error[usage]" in p.stderr, "unknown flag is rejected")
    p = run("prune", "--input", WORK / "missing.json", expect_ok=False)
    check(p.returncode != 0, "missing input is rejected")
    p = run("prune", "--input", hier, "--k2", 1.5, "--output-dir", WORK / "bad", expect_ok=False)
    check(p.returncode != 0 and "error[config]" in p.stderr, "out-of-range ratio is rejected")

    if FAILURES:
        print(f"{len(FAILURES)} check(s) failed")
        return 1
    print("all CLI checks passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
