#!/usr/bin/env python3
"""Writes the hand-labeled penalty-benchmark replay fixtures.

Each generation is labeled by hand when it is written below. An independent
evaluator in this script re-derives every label and refuses to write the
fixture if any hand label disagrees with it.
"""

import json
import math
import pathlib
import sys

ROOT = pathlib.Path(__file__).resolve().parent.parent
PROMPTS = json.loads((ROOT / "crates/core/data/penalty_bench_prompts.json").read_text())
OUT = ROOT / "crates/core/tests/fixtures/bench"

ONE = {"P": "PRO", "K": "LYS", "G": "GLY"}
ONE_OF = {v: k for k, v in ONE.items()}


def block(*lines):
    return "\n".join(["PENALTY_DEFINITION", *lines, "END_PENALTY_DEFINITION"])


def wrap(body, style):
    if style == 0:
        return body
    if style == 1:
        return f"<response>\n{body}\n</response>"
    return f"The block below follows the requested syntax.\n\n<response>\n{body}\n</response>"


# ---------------------------------------------------------------- evaluator


def fields(text):
    if "<response>" in text:
        text = text.split("<response>", 1)[1].rsplit("</response>", 1)[0]
    lines = [l.split("#", 1)[0].strip() for l in text.strip().splitlines()]
    lines = [l for l in lines if l]
    if lines.count("PENALTY_DEFINITION") != 1 or lines[0] != "PENALTY_DEFINITION" or lines[-1] != "END_PENALTY_DEFINITION":
        return None
    out = {}
    for l in lines[1:-1]:
        k, _, v = l.partition(" ")
        if k in out:
            return None
        out[k] = v.strip()
    return out


def residues(tok):
    codes = set()
    for t in tok.replace(",", " ").split():
        codes.add(ONE.get(t, t))
    return codes


def eval_simplified(f):
    allowed = {"TYPE", "SHAPE", "TARGET", "RADIUS", "BOUNDARY", "STRENGTH"}
    if f is None or not set(f) <= allowed or not {"TYPE", "SHAPE", "TARGET", "BOUNDARY", "STRENGTH"} <= set(f):
        return None
    if "." in f["TARGET"] or "." in f.get("RADIUS", "0"):
        return ("fraction", None)
    t, r, s = int(f["TARGET"]), int(f.get("RADIUS", "0")), float(f["STRENGTH"])
    lo, hi = {"ABOVE": (-math.inf, t), "BELOW": (t, math.inf), "OUTSIDE": (t - r, t + r)}[f["SHAPE"]]
    law = {"CONSTANT": lambda d: s, "LINEAR": lambda d: s * d, "QUADRATIC": lambda d: s * d * d}[f["BOUNDARY"]]

    def energy(c):
        d = max(0, lo - c, c - hi)
        return law(d) if d > 0 else 0.0

    return (residues(f["TYPE"]), energy)


def eval_original(f):
    allowed = {"TYPE", "ABSOLUTE", "DELTA_START", "DELTA_END", "FRACTION", "FRACT_DELTA_START", "FRACT_DELTA_END",
               "PENALTIES", "BEFORE_FUNCTION", "AFTER_FUNCTION"}
    if f is None or not set(f) <= allowed or "TYPE" not in f or "PENALTIES" not in f:
        return None
    if "FRACTION" in f:
        return ("fraction", None)
    a, ds, de = int(f["ABSOLUTE"]), int(f["DELTA_START"]), int(f["DELTA_END"])
    p = [float(x) for x in f["PENALTIES"].split()]
    if ds > de or len(p) != de - ds + 1:
        return None
    before = f.get("BEFORE_FUNCTION", "QUADRATIC")
    after = f.get("AFTER_FUNCTION", "QUADRATIC")
    lo, hi = a + ds, a + de
    n = len(p)

    def energy(c):
        if n == 1:
            return p[0]
        if c < lo:
            return {"CONSTANT": p[0],
                    "LINEAR": p[0] + (p[1] - p[0]) * (c - lo),
                    "QUADRATIC": p[1] + (p[0] - p[1]) * (c - (lo + 1)) ** 2}[before]
        if c > hi:
            return {"CONSTANT": p[-1],
                    "LINEAR": p[-1] + (p[-1] - p[-2]) * (c - hi),
                    "QUADRATIC": p[-2] + (p[-1] - p[-2]) * (c - (hi - 1)) ** 2}[after]
        return p[c - lo]

    return (residues(f["TYPE"]), energy)


def reference(prompt):
    lo = prompt["lower"] if prompt["lower"] is not None else -math.inf
    hi = prompt["upper"] if prompt["upper"] is not None else math.inf
    s = prompt["slope"]
    return lambda c: s * (max(0, lo - c) + max(0, c - hi))


def oracle_label(prompt, text, syntax):
    parsed = (eval_simplified if syntax == "simplified" else eval_original)(fields(text))
    if parsed is None or parsed[0] == "fraction":
        return False
    types, energy = parsed
    if types != {prompt["residue"]}:
        return False
    ref = reference(prompt)
    return all(abs(energy(c) - ref(c)) <= 1e-9 for c in range(65))


# ------------------------------------------------------- simplified corpus


def simplified_correct(p, k):
    code3 = p["residue"]
    code = code3 if k % 2 else ONE_OF[code3]
    s = int(p["slope"])
    if p["shape"] == "more_than":
        shape, target, radius = "ABOVE", p["upper"], [0, 0, 1, 3][k % 4]
    elif p["shape"] == "less_than":
        shape, target, radius = "BELOW", p["lower"], [0, 2, 0, 5][k % 4]
    else:
        shape = "OUTSIDE"
        target = (p["lower"] + p["upper"]) // 2
        radius = (p["upper"] - p["lower"]) // 2
    lines = [f"TYPE {code}", f"SHAPE {shape}", f"TARGET {target}", f"RADIUS {radius}", "BOUNDARY LINEAR", f"STRENGTH {s}"]
    if k % 5 == 4 and shape != "OUTSIDE":
        lines.remove(f"RADIUS {radius}")
    if k % 3 == 2:
        lines[0] += f"  # {p['residue'].lower()} count"
    return wrap(block(*lines), k % 3)


def simplified_corpus():
    out = []
    for p in PROMPTS:
        for k in range(10):
            if p["id"] == "below_gly_20" and k == 6:
                # Shape flipped: penalizes the wrong side of the target.
                text = wrap(block("TYPE GLY", "SHAPE ABOVE", "TARGET 20", "RADIUS 0", "BOUNDARY LINEAR", "STRENGTH 30"), 1)
                out.append((p, text, False))
            else:
                out.append((p, simplified_correct(p, k), True))
    return out


# --------------------------------------------------------- original corpus


def original_correct(p, k):
    code = p["residue"] if k % 2 == 0 else ONE_OF[p["residue"]]
    s = int(p["slope"])
    if p["shape"] == "more_than":
        t = int(p["upper"])
        variants = [
            (t, -1, 1, [0, 0, s]),
            (t, -1, 2, [0, 0, s, 2 * s]),
            (t + 1, -2, 1, [0, 0, s, 2 * s]),
            (t, -2, 1, [0, 0, 0, s]),
            (t, -3, 3, [0, 0, 0, 0, s, 2 * s, 3 * s]),
            (t + 2, -2, 1, [0, s, 2 * s, 3 * s]),
            (t, -1, 1, [0, 0, s]),
        ]
        a, ds, de, pen = variants[k]
        ends = ["BEFORE_FUNCTION CONSTANT", "AFTER_FUNCTION LINEAR"]
    elif p["shape"] == "less_than":
        t = int(p["lower"])
        variants = [
            (t, -1, 1, [s, 0, 0]),
            (t, -2, 1, [2 * s, s, 0, 0]),
            (t - 1, -1, 1, [2 * s, s, 0]),
            (t, -1, 2, [s, 0, 0, 0]),
            (t, -3, 3, [3 * s, 2 * s, s, 0, 0, 0, 0]),
            (t - 2, -1, 2, [3 * s, 2 * s, s, 0]),
            (t, -1, 1, [s, 0, 0]),
        ]
        a, ds, de, pen = variants[k]
        ends = ["BEFORE_FUNCTION LINEAR", "AFTER_FUNCTION CONSTANT"]
    else:
        lo, hi = int(p["lower"]), int(p["upper"])
        mid, r = (lo + hi) // 2, (hi - lo) // 2
        inner = [0] * (hi - lo + 1)
        variants = [
            (mid, -(r + 1), r + 1, [s, *inner, s]),
            (mid, -(r + 2), r + 2, [2 * s, s, *inner, s, 2 * s]),
            (lo, -1, hi - lo + 1, [s, *inner, s]),
            (hi, lo - hi - 1, 1, [s, *inner, s]),
            (mid, -(r + 2), r + 1, [2 * s, s, *inner, s]),
            (mid, -(r + 1), r + 2, [s, *inner, s, 2 * s]),
            (mid, -(r + 1), r + 1, [s, *inner, s]),
        ]
        a, ds, de, pen = variants[k]
        ends = ["BEFORE_FUNCTION LINEAR", "AFTER_FUNCTION LINEAR"]
    lines = [f"TYPE {code}", f"ABSOLUTE {a}", f"DELTA_START {ds}", f"DELTA_END {de}",
             "PENALTIES " + " ".join(str(x) for x in pen), *ends]
    if k == 6:
        lines.insert(0, f"# penalty for {p['text'].split('penalizes ', 1)[1].split('.')[0]}")
    return wrap(block(*lines), k % 3)


def original_wrong(p, k):
    s = int(p["slope"])
    code = p["residue"]
    if p["shape"] == "more_than":
        t = int(p["upper"])
        table = [
            # Start function left at its quadratic default.
            block(f"TYPE {code}", f"ABSOLUTE {t}", "DELTA_START 0", "DELTA_END 1", f"PENALTIES 0 {s}", "AFTER_FUNCTION LINEAR"),
            # Range starts above the target.
            block(f"TYPE {code}", f"ABSOLUTE {t}", "DELTA_START 1", "DELTA_END 2", f"PENALTIES {s} {2 * s}",
                  "BEFORE_FUNCTION CONSTANT", "AFTER_FUNCTION LINEAR"),
            # Negative entries reward the residue.
            block(f"TYPE {code}", f"ABSOLUTE {t}", "DELTA_START -5", "DELTA_END 0", f"PENALTIES 0 0 0 0 -{s} -{2 * s}",
                  "BEFORE_FUNCTION CONSTANT", "AFTER_FUNCTION LINEAR"),
        ]
    elif p["shape"] == "less_than":
        t = int(p["lower"])
        table = [
            # Too few PENALTIES entries.
            block(f"TYPE {code}", f"ABSOLUTE {t}", "DELTA_START -1", "DELTA_END 1", f"PENALTIES {s} 0",
                  "BEFORE_FUNCTION LINEAR", "AFTER_FUNCTION CONSTANT"),
            # Penalizes the wrong side.
            block(f"TYPE {code}", f"ABSOLUTE {t}", "DELTA_START -1", "DELTA_END 1", f"PENALTIES 0 0 {s}",
                  "BEFORE_FUNCTION CONSTANT", "AFTER_FUNCTION LINEAR"),
            # Fractional target for a count prompt.
            block(f"TYPE {code}", "FRACTION 0.1", "FRACT_DELTA_START -0.05", "FRACT_DELTA_END 0.05", f"PENALTIES {s} 0 0",
                  "BEFORE_FUNCTION LINEAR", "AFTER_FUNCTION CONSTANT"),
        ]
    else:
        lo, hi = int(p["lower"]), int(p["upper"])
        mid, r = (lo + hi) // 2, (hi - lo) // 2
        inner = " ".join(["0"] * (hi - lo + 1))
        table = [
            # Off by one: the range edge itself is penalized.
            block(f"TYPE {code}", f"ABSOLUTE {mid}", f"DELTA_START -{r}", f"DELTA_END {r}",
                  f"PENALTIES {s} " + " ".join(["0"] * (hi - lo - 1)) + f" {s}", "BEFORE_FUNCTION LINEAR", "AFTER_FUNCTION LINEAR"),
            # Wrong residue.
            block("TYPE ALA", f"ABSOLUTE {mid}", f"DELTA_START -{r + 1}", f"DELTA_END {r + 1}", f"PENALTIES {s} {inner} {s}",
                  "BEFORE_FUNCTION LINEAR", "AFTER_FUNCTION LINEAR"),
            # Constant end functions stop growing.
            block(f"TYPE {code}", f"ABSOLUTE {mid}", f"DELTA_START -{r + 1}", f"DELTA_END {r + 1}", f"PENALTIES {s} {inner} {s}",
                  "BEFORE_FUNCTION CONSTANT", "AFTER_FUNCTION CONSTANT"),
        ]
    return wrap(table[k], (k + 1) % 3)


FIG2 = block("TYPE PRO", "ABSOLUTE 5", "DELTA_START -5", "DELTA_END 0", "PENALTIES 0 0 0 0 -10 -20",
             "BEFORE_FUNCTION CONSTANT", "AFTER_FUNCTION LINEAR")


def original_corpus():
    out = []
    for p in PROMPTS:
        correct = [original_correct(p, k) for k in range(7)]
        wrong = [original_wrong(p, k) for k in range(3)]
        if p["id"] == "above_pro_5":
            wrong[2] = wrap(FIG2, 2)
        rows = [(p, t, True) for t in correct] + [(p, t, False) for t in wrong]
        # Interleave so labels are not sorted within a prompt.
        order = [0, 7, 1, 2, 8, 3, 4, 9, 5, 6]
        out.extend(rows[i] for i in order)
    return out


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for syntax, corpus in (("simplified", simplified_corpus()), ("original", original_corpus())):
        assert len(corpus) == 90, len(corpus)
        bad = [(p["id"], t) for p, t, label in corpus if oracle_label(p, t, syntax) != label]
        if bad:
            sys.exit(f"{syntax}: hand labels disagree with the evaluator: {bad}")
        path = OUT / f"{syntax}.jsonl"
        with path.open("w") as f:
            for p, text, label in corpus:
                f.write(json.dumps({"prompt_id": p["id"], "text": text, "label": label}) + "\n")
        print(f"{path}: {sum(l for _, _, l in corpus)} correct of {len(corpus)}")


if __name__ == "__main__":
    main()
