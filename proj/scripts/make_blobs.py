"""Writes data/blobs.csv: two Gaussian blobs in 2-D, labels 0/1."""

import csv
import pathlib

import numpy as np

rng = np.random.default_rng(2024)
n = 200
y = np.arange(n) % 2
x = rng.normal(0.0, 0.6, size=(n, 2))
x[:, 0] += np.where(y == 1, 2.0, -2.0)

out = pathlib.Path(__file__).resolve().parent.parent / "data" / "blobs.csv"
with out.open("w", newline="") as f:
    w = csv.writer(f)
    w.writerow(["x1", "x2", "label"])
    for xi, yi in zip(x, y):
        w.writerow([f"{xi[0]:.6f}", f"{xi[1]:.6f}", int(yi)])
