#!/usr/bin/env python3
"""Generate the Tracy-Widom (beta = 1) CDF table shipped in data/tw1.csv.

F1(s) = det(I - B_s) on L^2(0, inf) with B_s(x, y) = Ai(x + y + s)
(Ferrari-Spohn representation), evaluated by Gauss-Legendre Nystrom
discretization following Bornemann, Math. Comp. 79 (2010).

For s below LEFT_SWITCH the determinant underflows relative to its
absolute error, so the left tail uses the large-deviation expansion
  log F1(s) = -|s|^3/24 - |s|^{3/2}/(3 sqrt 2) - log|s|/16
              + log(2)/24 + zeta'(-1) + O(|s|^{-3/2}),
scaled so that it matches the determinant at the switch point.

Usage: gen_tw1_table.py [output.csv]
"""
import sys

import numpy as np
from scipy.special import airy

X_MIN, X_MAX, STEP = -10.0, 6.0, 0.01
NODES = 120
LEFT_SWITCH = -6.0
ZETA_PRIME_M1 = -0.16542114370045092


def f1_fredholm(s, nodes=NODES):
    # Ai(x + s) decays like exp(-2/3 x^{3/2}); 14 - s covers it to machine precision.
    upper = max(14.0 - s, 14.0)
    t, w = np.polynomial.legendre.leggauss(nodes)
    x = 0.5 * upper * (t + 1.0)
    w = 0.5 * upper * w
    sw = np.sqrt(w)
    kernel = airy(x[:, None] + x[None, :] + s)[0]
    mat = np.eye(nodes) - sw[:, None] * kernel * sw[None, :]
    return np.linalg.det(mat)


def log_f1_left(s):
    a = abs(s)
    return (-a**3 / 24.0 - a**1.5 / (3.0 * np.sqrt(2.0)) - np.log(a) / 16.0
            + np.log(2.0) / 24.0 + ZETA_PRIME_M1)


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else "tw1.csv"
    xs = np.round(np.arange(X_MIN, X_MAX + 0.5 * STEP, STEP), 10)
    shift = np.log(f1_fredholm(LEFT_SWITCH)) - log_f1_left(LEFT_SWITCH)
    cdf = np.empty_like(xs)
    for i, s in enumerate(xs):
        if s < LEFT_SWITCH:
            cdf[i] = np.exp(log_f1_left(s) + shift)
        else:
            cdf[i] = f1_fredholm(s)
    if not np.all(np.diff(cdf) > 0):
        raise SystemExit("table is not strictly increasing")
    with open(out, "w") as fh:
        fh.write("x,cdf\n")
        for s, f in zip(xs, cdf):
            fh.write(f"{s:.2f},{f:.17g}\n")


if __name__ == "__main__":
    main()
