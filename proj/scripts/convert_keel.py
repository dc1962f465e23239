"""Convert the KEEL copies of Pima diabetes and German credit into numeric CSV.

Usage: python scripts/convert_keel.py <pima.dat> <german.dat> <out_dir>

German credit categorical codes such as A34 (attribute 3, level 4) are mapped
to their level number, giving d=20 ordinal-coded features. Labels are written
in the {0,1} encoding: diabetes positive = 1, German credit "bad" (2) = 1.
"""
import csv
import re
import sys


def convert_pima(src, dst):
    with open(src) as f, open(dst, "w", newline="") as out:
        w = csv.writer(out)
        w.writerow(["pregnant", "glucose", "pressure", "triceps", "insulin",
                    "mass", "pedigree", "age", "label"])
        for line in f:
            parts = [p.strip() for p in line.strip().split(",")]
            if len(parts) != 9:
                continue
            label = 1 if parts[-1] == "tested_positive" else 0
            w.writerow(parts[:-1] + [label])


def convert_german(src, dst):
    with open(src) as f, open(dst, "w", newline="") as out:
        w = csv.writer(out)
        w.writerow([f"a{i}" for i in range(1, 21)] + ["label"])
        for line in f:
            parts = [p.strip() for p in line.strip().split(",")]
            if len(parts) != 21:
                continue
            feats = []
            for j, p in enumerate(parts[:-1]):
                m = re.fullmatch(rf"A{j + 1}(\d+)", p)
                feats.append(m.group(1) if m else p)
            w.writerow(feats + [int(parts[-1]) - 1])


if __name__ == "__main__":
    convert_pima(sys.argv[1], f"{sys.argv[3]}/diabetes.csv")
    convert_german(sys.argv[2], f"{sys.argv[3]}/german.csv")
