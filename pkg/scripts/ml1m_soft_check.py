"""Ingest raw MovieLens-1M (ratings.dat, movies.dat) and compare split sizes to the published counts.

Rules: rating >= 4 is positive, keep the most recent 20 months, split 10/5/5 months.
Exact agreement is not expected; the published counts imply filtering that is not described.
"""
import argparse
import json
import warnings

from scorerec.pipeline import ml1m_soft_check


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("ml1m_dir", help="directory holding ratings.dat and movies.dat")
    ap.add_argument("--out", default="artifacts/ml1m")
    args = ap.parse_args()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        report = ml1m_soft_check(args.ml1m_dir, args.out)
    print(json.dumps(report, indent=2))


if __name__ == "__main__":
    main()
