"""Every experiment end to end, then the report bundle.

    python scripts/run_suite.py --out runs/full [--config my.ini] [--workers 4]
"""
import sys

from oneshot_vos.cli import main

if __name__ == "__main__":
    sys.exit(main(["full-suite", *sys.argv[1:]]))
