"""Regenerate the synthetic replication fixture shipped in hierfdr/data.

The 88 included rows reproduce the published 2x2 classification counts
(31 / 36 / 1 / 20); p-values, fields and evident-test counts are synthetic.
The 12 excluded rows mirror the published exclusion categories.
"""

import csv
import sys
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "hierfdr" / "data" / "rpp_table1_fixture.csv"
COLUMNS = ("paper_id,field,evident_tests,original_p,adjusted_p,original_dir,"
           "replication_dir,replication_p,adjusted_any,excluded_reason").split(",")


def main(out: Path = OUT) -> None:
    rng = np.random.default_rng(2020)
    rows = []

    def r3(x: float) -> float:
        return float(f"{x:.4g}")

    def evident() -> int:
        return int(np.clip(np.round(np.exp(rng.normal(3.8, 0.9))), 5, 730))

    def record(cell: str) -> dict:
        orig = r3(rng.uniform(0.0005, 0.045) if cell in "cd" else rng.uniform(0.0001, 0.012))
        if cell in "ab":
            adj = r3(rng.uniform(max(orig, 0.0005), 0.05))
            adj = max(adj, orig)
        else:
            adj = r3(rng.uniform(max(orig, 0.051), 0.9))
        direction = "positive" if rng.random() < 0.7 else "negative"
        rep_dir = direction
        if cell in "ac":
            rep_p = r3(rng.uniform(0.0001, 0.049))
        elif rng.random() < 0.1:
            rep_p = r3(rng.uniform(0.001, 0.049))
            rep_dir = "negative" if direction == "positive" else "positive"
        else:
            rep_p = r3(rng.uniform(0.06, 0.95))
        return dict(original_p=orig, adjusted_p=adj, original_dir=direction,
                    replication_dir=rep_dir, replication_p=rep_p, excluded_reason="")

    cells = ["a"] * 31 + ["b"] * 36 + ["c"] * 1 + ["d"] * 20
    for cell in cells:
        rows.append(record(cell))
    reasons = (["statistical results not published"] * 2
               + ["original result replicated twice"]
               + ["replication aimed to establish non-significance"] * 3
               + ["recalculated original p > .05"] * 6)
    for reason in reasons:
        rec = record("d")
        if reason.startswith("statistical"):
            rec.update(original_p="", adjusted_p="", replication_p="", original_dir="",
                       replication_dir="")
        elif reason.startswith("recalculated"):
            orig = r3(rng.uniform(0.051, 0.2))
            rec.update(original_p=orig, adjusted_p=r3(min(1.0, orig * rng.uniform(1.0, 4.0))))
        rec["excluded_reason"] = reason
        rows.append(rec)

    order = rng.permutation(len(rows))
    fields = np.array(["cognitive"] * 30 + ["social"] * 52 + ["other"] * 18)
    rng.shuffle(fields)
    adjusted_any = np.zeros(len(rows), dtype=bool)
    adjusted_any[rng.choice(len(rows), 8, replace=False)] = True
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for k, i in enumerate(order):
            rec = rows[i]
            w.writerow([f"P{k + 1:03d}", fields[k], evident(), rec["original_p"], rec["adjusted_p"],
                        rec["original_dir"], rec["replication_dir"], rec["replication_p"],
                        "true" if adjusted_any[k] else "false", rec["excluded_reason"]])


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else OUT)
