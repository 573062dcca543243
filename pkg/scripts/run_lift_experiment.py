"""Planted-signal experiment: CI-augmented prompts (K_s=2) against the basic prompt (K_s=0).

Trains every stage once with stub providers, then scores the test split with
both prompt styles and prints AUC/UAUC per seed.
"""
import argparse
import tempfile
import warnings
from pathlib import Path

from scorerec import pipeline
from scorerec.config import RunConfig
from scorerec.synthetic import planted_signal, write_dataset


def one_seed(seed: int, root: Path) -> tuple:
    ip, mp = write_dataset(planted_signal(seed=seed), root / "data")
    cfg = RunConfig(interactions=str(ip), metadata=str(mp), artifacts_dir=str(root / "art"),
                    train_end=1000, val_end=2000, crm_epochs=100, seed=seed).validate()
    full = pipeline.run_all(cfg)
    basic = pipeline.run_experiment(cfg.with_overrides({
        "k_s": 0, "predictions_path": str(root / "basic.jsonl"), "report_path": str(root / "basic.json")}))
    return full, basic


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--out", help="keep artifacts here instead of a temp dir")
    args = ap.parse_args()
    print(f"{'seed':>4}  {'AUC K_s=2':>9}  {'AUC K_s=0':>9}  {'lift':>7}  {'UAUC K_s=2':>10}  {'UAUC K_s=0':>10}")
    for seed in args.seeds:
        with tempfile.TemporaryDirectory() as tmp, warnings.catch_warnings():
            warnings.simplefilter("ignore")
            root = Path(args.out) / f"seed{seed}" if args.out else Path(tmp)
            full, basic = one_seed(seed, root)
        print(f"{seed:>4}  {full.auc:9.4f}  {basic.auc:9.4f}  {full.auc - basic.auc:+7.4f}  "
              f"{full.uauc:10.4f}  {basic.uauc:10.4f}")


if __name__ == "__main__":
    main()
