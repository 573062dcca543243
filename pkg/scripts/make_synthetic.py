"""Write the seeded synthetic corpora to data/ as TSV files."""
import argparse
from pathlib import Path

from scorerec.synthetic import planted_clusters, planted_signal, two_block, write_dataset

GENERATORS = {"planted": planted_signal, "two_block": two_block, "clusters": planted_clusters}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data"))
    ap.add_argument("--only", choices=sorted(GENERATORS))
    args = ap.parse_args()
    for name, gen in GENERATORS.items():
        if args.only and name != args.only:
            continue
        ip, mp = write_dataset(gen(seed=args.seed), Path(args.out) / name)
        print(f"{name}: {ip} {mp}")


if __name__ == "__main__":
    main()
