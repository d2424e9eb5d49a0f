#!/usr/bin/env python3
"""Walk a gallery of offspring laws through the classification pipeline.

For each law the script prints the growth factor m, the full root set of the
litter-mean equation, the decisive modulus gamma_* of the roots other than
1/m, and the regime verdict: fluctuations of order sqrt(Z_n) (I), of order
sqrt(n Z_n) (II), or persistent oscillations of order gamma_*^{-n} (III).
The boundary is gamma_* against 1/sqrt(m).

Run:  python3 demos/regime_gallery.py
"""

from __future__ import annotations

import math

from cmjfluct import make_law
from cmjfluct.errors import RefusalError
from cmjfluct.limits import build_spectrum, predictor_coeffs
from cmjfluct.offspring import moments
from cmjfluct.spectral import classify

GALLERY = [
    ("binary-or-triple at age 1", [(0.5, (1,)), (0.5, (3,))]),
    ("two ages, mean litters (2, 1)", [(0.5, (1, 1)), (0.5, (3, 1))]),
    ("two ages, mean litters (2, 8)", [(0.5, (1, 8)), (0.5, (3, 8))]),
    ("two ages, mean litters (1, 9)", [(0.5, (0, 9)), (0.5, (2, 9))]),
    ("deterministic doubling", [(1.0, (2,))]),
    ("three ages, complex critical pair", [(1.0, (0, 2, 16))]),
]

for name, atoms in GALLERY:
    law = make_law(atoms)
    report = classify(law)
    print(f"\n=== {name} ===")
    print(f"  m = {report.m:.12f}   1/sqrt(m) = {1.0 / math.sqrt(report.m):.12f}")
    for root, mult in zip(report.roots, report.multiplicities):
        tag = []
        if abs(root - 1.0 / report.m) <= 1e-9:
            tag.append("= 1/m")
        if any(abs(root - g) <= 1e-9 for g in report.gamma_crit):
            tag.append("critical")
        if mult > 1:
            tag.append(f"multiplicity {mult}")
        extra = f"   ({', '.join(tag)})" if tag else ""
        print(f"  root {root.real:+.9f}{root.imag:+.9f}j   |.| = {abs(root):.9f}{extra}")
    print(f"  gamma_* = {report.gamma_star:.12f}  ->  regime {report.regime}"
          f"   (margin gamma_*·sqrt(m) - 1 = {report.margin:+.3e})")

# The regime decides which limit object exists.  Asking for the wrong one is
# refused rather than silently extrapolated; show one refusal per direction.
print("\n=== refusals ===")
osc = make_law([(0.5, (0, 9)), (0.5, (2, 9))])
try:
    rep = classify(osc)
    predictor_coeffs(build_spectrum(rep, moments(osc)), 2)
except RefusalError as exc:
    print(f"  predictor on an oscillating law  -> refused: {exc}")

double_root = make_law([(1.0, (0, 12, 16))])
try:
    rep = classify(double_root)
    build_spectrum(rep, moments(double_root))
except RefusalError as exc:
    print(f"  limit variance at a double root  -> refused: {exc}")
