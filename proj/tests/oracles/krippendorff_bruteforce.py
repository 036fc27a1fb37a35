#!/usr/bin/env python3
"""Brute-force coincidence-matrix reference for Krippendorff's alpha
(nominal data), used to freeze the expected value for the six-item hand
dataset asserted by test_eval and the acceptance suite.

Run from this directory:  python3 krippendorff_bruteforce.py
"""

import json
from collections import defaultdict
from fractions import Fraction

# (annotator_1, annotator_2) labels for the six-item hand dataset
HAND_DATASET = [
    ("A", "A"),
    ("A", "B"),
    ("B", "B"),
    ("tie", "tie"),
    ("A", "tie"),
    ("B", "B"),
]


def alpha(items):
    coincidence = defaultdict(Fraction)
    for labels in items:
        m = len(labels)
        if m < 2:
            continue
        w = Fraction(1, m - 1)
        for i, a in enumerate(labels):
            for j, b in enumerate(labels):
                if i != j:
                    coincidence[(a, b)] += w
    values = sorted({c for pair in coincidence for c in pair})
    marginals = {c: sum(coincidence[(c, k)] for k in values) for c in values}
    n = sum(marginals.values())
    d_o = sum(coincidence[(c, k)] for c in values for k in values if c != k) / n
    d_e = sum(marginals[c] * marginals[k]
              for c in values for k in values if c != k) / (n * (n - 1))
    if d_e == 0:
        return Fraction(1)
    return 1 - d_o / d_e


def main():
    value = alpha(HAND_DATASET)
    out = {
        "hand_dataset": [list(pair) for pair in HAND_DATASET],
        "alpha": float(value),
        "alpha_exact": f"{value.numerator}/{value.denominator}",
    }
    with open("krippendorff_expected.json", "w") as f:
        json.dump(out, f, indent=2)
        f.write("\n")
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
