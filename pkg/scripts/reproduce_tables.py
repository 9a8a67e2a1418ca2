#!/usr/bin/env python3
"""Print the three reference tables of the selectivity analysis.

Table 1: bandwidth constants C at -3/-10/-20/-30 dB for each window family.
Table 2: mean delay of the causal kernels in units of sqrt(tau).
Table 3: position of the kernel maximum in units of sqrt(tau).

Equivalent to `tonescale analyze`; kept as a script so the numbers can be
regenerated and diffed without remembering CLI flags.
"""

import argparse
import sys

from tonescale.cli_io import cli_main


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--table", type=int, default=None, help="print one table (1, 2, or 3)")
    ap.add_argument("--n", type=float, default=8.0, help="carrier periods per window extent")
    ap.add_argument("--out-csv", default=None, help="also write the chosen table as CSV")
    args = ap.parse_args()

    argv = ["analyze", "--n", str(args.n)]
    if args.table is not None:
        argv += ["--table", str(args.table)]
    if args.out_csv is not None:
        argv += ["--out-csv", args.out_csv]
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
