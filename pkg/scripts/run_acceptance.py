#!/usr/bin/env python3
"""Run the acceptance criteria and print one PASS/FAIL line per criterion.

    python scripts/run_acceptance.py            # all 15 criteria (about 6 minutes on one core)
    python scripts/run_acceptance.py --fast     # skip the Monte-Carlo criteria
"""
import argparse
import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--fast", action="store_true", help="skip criteria marked slow")
    args = ap.parse_args(argv)
    marks = "acceptance and not slow" if args.fast else "acceptance"
    return pytest.main([str(ROOT / "tests" / "test_acceptance.py"), "-m", marks, "-q", "-p", "no:cacheprovider"])


if __name__ == "__main__":
    sys.exit(main())
