"""Regenerate the small public-domain CSVs bundled under data/.

Sources are the classic datasets shipped with scikit-learn (Fisher's iris,
the UCI wine data, the diabetes regression set). Needs scikit-learn, which
is a tooling dependency only; the generated CSVs are checked in.
"""

import csv
from pathlib import Path

from sklearn.datasets import load_diabetes, load_iris, load_wine

OUT = Path(__file__).resolve().parent.parent / "data"


def _clean_name(name: str) -> str:
    return name.replace(" (cm)", "_cm").replace(" ", "_").replace("(", "").replace(")", "")


def dump(name, data, target_labels=None):
    header = [_clean_name(f) for f in data.feature_names]
    rows = data.data.tolist()
    if target_labels is not None:
        header.append("class")
        labels = [data.target_names[t] for t in data.target]
        rows = [r + [lab] for r, lab in zip(rows, labels)]
    with open(OUT / f"{name}.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for r in rows:
            writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in r])
    print(f"wrote data/{name}.csv ({len(rows)} rows, {len(header)} cols)")


if __name__ == "__main__":
    OUT.mkdir(exist_ok=True)
    dump("iris", load_iris(), target_labels=True)
    dump("wine", load_wine())
    dump("diabetes", load_diabetes(scaled=False))
