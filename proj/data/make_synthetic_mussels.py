#!/usr/bin/env python3
"""Generates data/mussels_synthetic.csv, the stand-in for the horse-mussel sample.

Construction (all on the Yeo-Johnson lambda = 0.3 scale, then inverted back to
raw units):
  * one latent size factor F ~ N(0,1) drives four shell measurements
      t_H = 10.0 + 0.756 F + 0.28 e_H     (shell height, mm)
      t_L = 13.0 + 1.080 F + 0.42 e_L     (shell length, mm)
      t_W = 9.3  + 0.990 F + 0.38 e_W     (shell width, mm)
      t_S = 11.0 + 3.780 F + 1.10 e_S     (shell mass, g)
  * muscle mass is exactly linear on the transformed scale with the
    coefficient direction (0.256, -0.025, 0.104, 0.634) and no intercept, so
    the lambda = 0.3 transformed no-intercept linear model holds exactly:
      t_M = 0.256 t_H - 0.025 t_L + 0.104 t_W + 0.634 t_S + 0.45 e_M
  * raw = psi^{-1}(0.3, t) = (1 + 0.3 t)^{1/0.3} - 1, rounded to 0.1

The inverse transform is convex, so the raw-scale regression of M on
(H, L, W, S) is curved while the transformed one is linear by construction;
e_* are iid N(0,1), seed fixed below.
"""

import csv
import numpy as np

rng = np.random.default_rng(20260810)
n = 82

F = rng.standard_normal(n)
tH = 10.0 + 0.756 * F + 0.28 * rng.standard_normal(n)
tL = 13.0 + 1.080 * F + 0.42 * rng.standard_normal(n)
tW = 9.3 + 0.990 * F + 0.38 * rng.standard_normal(n)
tS = 11.0 + 3.780 * F + 1.10 * rng.standard_normal(n)
tM = 0.256 * tH - 0.025 * tL + 0.104 * tW + 0.634 * tS \
    + 0.45 * rng.standard_normal(n)


def inv_yj(t, lam=0.3):
    return np.power(1.0 + lam * t, 1.0 / lam) - 1.0


cols = {
    "H": inv_yj(tH),
    "L": inv_yj(tL),
    "W": inv_yj(tW),
    "S": inv_yj(tS),
    "M": inv_yj(tM),
}

with open("mussels_synthetic.csv", "w", newline="") as fh:
    w = csv.writer(fh)
    w.writerow(["H", "L", "W", "S", "M"])
    for i in range(n):
        w.writerow([f"{cols[c][i]:.1f}" for c in ("H", "L", "W", "S", "M")])

for c, v in cols.items():
    print(f"{c}: min={v.min():.1f} max={v.max():.1f} mean={v.mean():.1f}")
