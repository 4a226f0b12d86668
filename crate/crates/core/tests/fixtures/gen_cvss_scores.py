#!/usr/bin/env python3
"""Regenerate cvss_scores.jsonl from the reference `cvss` Python package.

    pip install cvss==3.*
    python3 gen_cvss_scores.py > cvss_scores.jsonl

Temporal scores are recorded only when a temporal metric is defined, and
environmental scores only when an environmental metric is defined.
"""
import json
import random

from cvss import CVSS2, CVSS3

V3_BASE = [("AV", "NALP"), ("AC", "LH"), ("PR", "NLH"), ("UI", "NR"),
           ("S", "UC"), ("C", "HLN"), ("I", "HLN"), ("A", "HLN")]
V3_TEMPORAL = [("E", "XUPFH"), ("RL", "XOTWU"), ("RC", "XURC")]
V3_ENV = [("CR", "XLMH"), ("IR", "XLMH"), ("AR", "XLMH"),
          ("MAV", "XNALP"), ("MAC", "XLH"), ("MPR", "XNLH"), ("MUI", "XNR"),
          ("MS", "XUC"), ("MC", "XNLH"), ("MI", "XNLH"), ("MA", "XNLH")]

V2_BASE = [("AV", ["L", "A", "N"]), ("AC", ["H", "M", "L"]), ("Au", ["M", "S", "N"]),
           ("C", ["N", "P", "C"]), ("I", ["N", "P", "C"]), ("A", ["N", "P", "C"])]
V2_TEMPORAL = [("E", ["U", "POC", "F", "H", "ND"]), ("RL", ["OF", "TF", "W", "U", "ND"]),
               ("RC", ["UC", "UR", "C", "ND"])]
V2_ENV = [("CDP", ["N", "L", "LM", "MH", "H", "ND"]), ("TD", ["N", "L", "M", "H", "ND"]),
          ("CR", ["L", "M", "H", "ND"]), ("IR", ["L", "M", "H", "ND"]), ("AR", ["L", "M", "H", "ND"])]


def pick(rng, table, optional_rate):
    out = []
    for key, values in table:
        if optional_rate is not None and rng.random() < optional_rate:
            continue
        out.append((key, rng.choice(list(values))))
    return out


def defined(entries, sentinel):
    return any(v != sentinel for _, v in entries)


def num(x):
    return None if x is None else float(x)


def v3(rng, minor):
    base = pick(rng, V3_BASE, None)
    temporal = pick(rng, V3_TEMPORAL, rng.choice([1.0, 0.5, 0.2]))
    env = pick(rng, V3_ENV, rng.choice([1.0, 0.7, 0.3, 0.0]))
    entries = base + temporal + env
    text = "CVSS:3.%d/" % minor + "/".join("%s:%s" % kv for kv in entries)
    b, t, e = CVSS3(text).scores()
    return {
        "vector": text,
        "base": num(b),
        "temporal": num(t) if defined(temporal, "X") else None,
        "environmental": num(e) if defined(env, "X") else None,
    }


def v2(rng):
    base = pick(rng, V2_BASE, None)
    temporal = pick(rng, V2_TEMPORAL, rng.choice([1.0, 0.5, 0.2]))
    env = pick(rng, V2_ENV, rng.choice([1.0, 0.6, 0.3]))
    text = "/".join("%s:%s" % kv for kv in base + temporal + env)
    b, t, e = CVSS2(text).scores()
    return {"vector": text, "base": num(b), "temporal": num(t), "environmental": num(e)}


def main():
    rng = random.Random(20240601)
    rows = [v3(rng, 1) for _ in range(1500)]
    rows += [v3(rng, 0) for _ in range(400)]
    rows += [v2(rng) for _ in range(400)]
    for row in rows:
        print(json.dumps(row, sort_keys=True))


if __name__ == "__main__":
    main()
