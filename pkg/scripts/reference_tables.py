"""Rankings, metric consistency and diagnostic/downstream correlations over the bundled score tables.

    python scripts/reference_tables.py --out runs/reference
"""

import argparse
import json
from pathlib import Path

from sentprobe.analysis import (
    ScoreTable,
    average_rank,
    correlation_matrix,
    id_perm_consistency,
    load_fixture,
    rank_encoders,
)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--metrics", help="diagnostic ScoreTable CSV (default: bundled)")
    parser.add_argument("--downstream", help="downstream ScoreTable CSV (default: bundled)")
    parser.add_argument("--out", default="runs/reference")
    args = parser.parse_args()

    metrics = ScoreTable.from_csv(args.metrics) if args.metrics else load_fixture("reference_metrics")
    down = ScoreTable.from_csv(args.downstream) if args.downstream else load_fixture("reference_downstream")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    print("Id/PERM consistency")
    for row in id_perm_consistency(metrics):
        print(f"  {row['encoder']:14s} {row['stated']:6.2f} vs {row['recomputed']:6.2f}"
              f"{'' if row['consistent'] else '  FLAGGED'}")

    print("\nrank by Id            average downstream rank")
    by_id = list(rank_encoders(metrics, "Id").items())
    ds = list(average_rank(down).items())
    for i in range(max(len(by_id), len(ds))):
        left = f"{by_id[i][1]:g}. {by_id[i][0]}" if i < len(by_id) else ""
        right = f"{ds[i][1]:g}. {ds[i][0]}" if i < len(ds) else ""
        print(f"  {left:20s}  {right}")

    matrix = correlation_matrix(metrics, down)
    matrix.write(out / "corr.csv", out / "summary.json")
    print(f"\nSpearman over {len(matrix.encoders)} common encoders")
    for d, s in matrix.summary().items():
        print(f"  {d:8s} mean {s['mean_rho']:+.2f}  min {s['min_rho']:+.2f}")
    (out / "ranks.json").write_text(json.dumps({"by_id": dict(by_id), "downstream": dict(ds)}, indent=2) + "\n")


if __name__ == "__main__":
    main()
