"""Print an mse_stats.csv as a cost-by-layer table of (mean, median, min)."""
import argparse
import csv
from collections import defaultdict


def table(path, relative=False):
    cols = ("rel_mean", "rel_median", "rel_min") if relative else ("mean", "median", "min")
    grid = defaultdict(dict)
    layers = []
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            label = r["cost_kind"] if r["cost_kind"] != "hybrid" else f"hybrid a={float(r['alpha']):g}"
            if r["ansatz"] and r["cost_kind"] == "hybrid" and "compare_ansatz" in path:
                label = r["ansatz"]
            grid[label][r["layers"]] = tuple(float(r[c]) for c in cols)
            if r["layers"] not in layers:
                layers.append(r["layers"])
    lines = ["| cell | " + " | ".join(f"L={L}" for L in layers) + " |",
             "|---" * (len(layers) + 1) + "|"]
    for label, row in grid.items():
        cells = [" / ".join(f"{v:.3g}" for v in row[L]) if L in row else "" for L in layers]
        lines.append(f"| {label} | " + " | ".join(cells) + " |")
    return "\n".join(lines)


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("path")
    p.add_argument("--relative", action="store_true", help="use solution-normalized MSE columns")
    a = p.parse_args()
    print(table(a.path, a.relative))
