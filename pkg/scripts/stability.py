"""Cross-variant stability of the diagnostics on the synthetic grammar.

Trains concat+MOS and init_state+softmax decoders for each native encoder,
scores held-out sentences, and prints the Spearman correlation of every
diagnostic's encoder ranking between the two variants. ``--train-fraction``
adds a low-resource concat+MOS setting.

    python scripts/stability.py --out runs/stability --train-fraction 0.2
"""

import argparse
import json
import logging
from pathlib import Path

from sentprobe.experiments import DeskConfig, stability_experiment


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="runs/stability")
    parser.add_argument("--n-sentences", type=int, default=1000)
    parser.add_argument("--n-heldout", type=int, default=300)
    parser.add_argument("--epochs", type=int, default=30)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--encoders", default="avg,max,hier,concat")
    parser.add_argument("--train-fraction", type=float, default=None)
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    cfg = DeskConfig(n_sentences=args.n_sentences, epochs=args.epochs, ambiguous=True, seed=args.seed)
    out = stability_experiment(cfg, tuple(args.encoders.split(",")), args.n_heldout, args.train_fraction)

    reports = {variant: {enc: rep.to_dict() for enc, rep in per.items()} for variant, per in out["reports"].items()}
    result = {"reports": reports, "rho": out["rho"]}
    path = Path(args.out)
    path.mkdir(parents=True, exist_ok=True)
    (path / "stability.json").write_text(json.dumps(result, indent=2) + "\n")

    for variant, per in reports.items():
        print(f"[{variant}]")
        for enc, rep in per.items():
            print(f"  {enc:14s} Id {rep['id_rate']:6.2f}  PERM {rep['perm_rate']:6.2f}  "
                  f"Id/PERM {rep['id_over_perm']}  BLEU {rep['bleu']:6.2f}")
    for other, rho in out["rho"].items():
        cells = "  ".join(f"{d} {'n/a' if v is None else f'{v:+.2f}'}" for d, v in rho.items())
        print(f"rho(concat+mos, {other}): {cells}")


if __name__ == "__main__":
    main()
