#!/usr/bin/env python3
"""Write the two tabular benchmark datasets as headered CSV files.

Breast Cancer (Wisconsin diagnostic) is read from the copy that ships with
scikit-learn. Diabetes (Pima Indians) is read from the KEEL repository copy
bundled in the `keel-ds` wheel; pass --keel-wheel or let the script fetch the
wheel with `pip download`.

    python3 scripts/fetch_datasets.py --out data
"""
import argparse
import csv
import glob
import os
import subprocess
import tempfile
import zipfile


def write_breast_cancer(out_dir):
    from sklearn.datasets import load_breast_cancer

    ds = load_breast_cancer()
    names = [n.replace(" ", "_") for n in ds.feature_names]
    path = os.path.join(out_dir, "breast_cancer.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names + ["diagnosis"])
        for row, label in zip(ds.data, ds.target):
            w.writerow([repr(float(v)) for v in row] + [int(label)])
    return path, len(ds.target)


def find_keel_wheel(explicit):
    if explicit:
        return explicit
    tmp = tempfile.mkdtemp()
    subprocess.run(["pip", "download", "--no-deps", "-q", "-d", tmp, "keel-ds"],
                   check=True)
    return glob.glob(os.path.join(tmp, "keel_ds-*.whl"))[0]


def write_diabetes(out_dir, wheel):
    raw = zipfile.ZipFile(wheel).read("keel_ds/data/balanced/raw/pima.dat").decode()
    rows = [l.strip() for l in raw.splitlines() if l.strip() and not l.startswith("@")]
    names = ["pregnancies", "glucose", "blood_pressure", "skin_thickness",
             "insulin", "bmi", "diabetes_pedigree", "age"]
    path = os.path.join(out_dir, "diabetes.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names + ["outcome"])
        for line in rows:
            cells = [c.strip() for c in line.split(",")]
            label = 1 if cells[-1] == "tested_positive" else 0
            w.writerow(cells[:-1] + [label])
    return path, len(rows)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data")
    ap.add_argument("--keel-wheel", default=None)
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    print(*write_breast_cancer(args.out))
    print(*write_diabetes(args.out, find_keel_wheel(args.keel_wheel)))


if __name__ == "__main__":
    main()
