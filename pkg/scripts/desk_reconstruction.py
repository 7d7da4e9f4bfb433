"""Train a decoder over mean-pooled random token embeddings on the synthetic grammar and score reconstructions.

    python scripts/desk_reconstruction.py --out runs/desk
"""

import argparse
import json
import logging
import time
from dataclasses import asdict, fields
from pathlib import Path

from sentprobe.diagnostics import write_pairs
from sentprobe.experiments import DeskConfig, reconstruction_experiment


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="runs/desk")
    for f in fields(DeskConfig):
        parser.add_argument("--" + f.name.replace("_", "-"), type=type(f.default), default=f.default, dest=f.name)
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    cfg = DeskConfig(**{f.name: getattr(args, f.name) for f in fields(DeskConfig)})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    result = reconstruction_experiment(cfg)
    elapsed = time.perf_counter() - t0

    result["checkpoint"].save(out / "decoder.ckpt")
    result["data"].vocab.save(out / "vocab.txt")
    write_pairs(out / "pairs.jsonl", result["pairs"])
    report = result["report"].to_dict()
    report["seconds"] = round(elapsed, 1)
    (out / "config.json").write_text(json.dumps(asdict(cfg), indent=2) + "\n")
    (out / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    print(json.dumps(report, indent=2))
    misses = [p for p in result["pairs"] if p.x.tokens != p.y.tokens][:5]
    for p in misses:
        print(f"  {p.x.text!r} -> {p.y.text!r}")


if __name__ == "__main__":
    main()
