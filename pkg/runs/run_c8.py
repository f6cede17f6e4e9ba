"""Desk-scale certified lower sweep (n=25, N=100, square-weighted gauge, gap .01)."""
import logging
import sys

from ermbounds.solve import SolveOptions
from ermbounds.sweep import run_lower_sweep

C8_ARGS = dict(n=25, N=100, weighting="SquareWeighted")
C8_OPTIONS = SolveOptions(relative_gap=0.01, time_limit=120.0, backend="highs")
C8_STRENGTHEN = True

if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    out = sys.argv[1] if len(sys.argv) > 1 else "runs/lower_n25_N100_square"
    rep = run_lower_sweep(**C8_ARGS, options=C8_OPTIONS, strengthen=C8_STRENGTHEN, run_dir=out)
    print(rep.aggregate, rep.total_runtime)
