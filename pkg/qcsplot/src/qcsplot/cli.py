"""qcsplot: render paper-figure analogues from a qcslab results directory."""

from __future__ import annotations

import argparse
import sys

from .figures import RENDERERS, plot_recipe


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="qcsplot")
    parser.add_argument("results_dir", help="qcslab run directory (contains results.csv)")
    parser.add_argument("--figure", required=True, choices=sorted(RENDERERS))
    parser.add_argument("--out", required=True, help="output directory for images")
    args = parser.parse_args(argv)
    outputs = plot_recipe(args.results_dir, args.figure, args.out)
    for path in outputs:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
