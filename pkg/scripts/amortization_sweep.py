"""How PPD moves as a generated graph is reused across more solves.

Prices one generation call and one solve call from a price sheet, then sweeps
the amortization count N. Solve-only PPD is the N -> infinity limit.
"""

import argparse
from pathlib import Path

from braid.economics import PriceSheet, TokenUsage, amortized_cost, cost_of_usage, ppd

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--prices", default=ROOT / "configs/demo/prices.csv")
    ap.add_argument("--generator", default="gpt-4.1")
    ap.add_argument("--solver", default="gpt-5-nano")
    ap.add_argument("--baseline", default="gpt-5")
    ap.add_argument("--gen-tokens", type=int, nargs=2, default=[900, 450], metavar=("IN", "OUT"))
    ap.add_argument("--solve-tokens", type=int, nargs=2, default=[700, 250], metavar=("IN", "OUT"))
    ap.add_argument("--baseline-tokens", type=int, nargs=2, default=[300, 1800], metavar=("IN", "OUT"))
    ap.add_argument("--accuracy", type=float, default=0.9)
    ap.add_argument("--baseline-accuracy", type=float, default=0.9)
    args = ap.parse_args()

    prices = PriceSheet.load(args.prices)
    c_gen = cost_of_usage(TokenUsage(*args.gen_tokens), args.generator, prices)
    c_solve = cost_of_usage(TokenUsage(*args.solve_tokens), args.solver, prices)
    c_base = cost_of_usage(TokenUsage(*args.baseline_tokens), args.baseline, prices)
    print(f"generation ${c_gen:.6f}  solve ${c_solve:.6f}  baseline ${c_base:.6f}")
    print(f"{'N':>8}  {'cost/question':>14}  {'PPD':>8}")
    for n in [1, 2, 5, 10, 100, 1000, 10**6]:
        cost = amortized_cost(c_gen, c_solve, n)
        print(f"{n:>8}  {cost:>14.8f}  {ppd(args.accuracy, cost, args.baseline_accuracy, c_base):>8.2f}")
    limit = ppd(args.accuracy, c_solve, args.baseline_accuracy, c_base)
    print(f"{'inf':>8}  {c_solve:>14.8f}  {limit:>8.2f}")


if __name__ == "__main__":
    main()
