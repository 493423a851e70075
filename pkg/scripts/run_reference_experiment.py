"""End-to-end run on the reference configuration.

Certifies the parameters, simulates the 2000-trial ensemble, runs the full
verification suite, and leaves summary.json / curve.csv / check reports in
--out (default out/reference).
"""

import argparse
import sys
from pathlib import Path

from zoomctl.cli import main as cli_main

ROOT = Path(__file__).resolve().parent.parent


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--config", default=str(ROOT / "configs" / "reference.cfg"))
    parser.add_argument("--out", default="out/reference")
    args = parser.parse_args()

    print("== feasibility ==")
    code = cli_main(["feasibility", args.config])
    if code != 0:
        return code
    print("\n== simulate ==")
    code = cli_main(["simulate", args.config, "--out", args.out, "--keep-traces", "3"])
    if code != 0:
        return code
    print("\n== verify ==")
    return cli_main(["verify", args.config, "--out", args.out])


if __name__ == "__main__":
    sys.exit(main())
