"""Rice mean, second factorial moment and variance of level-crossing counts.

With --paths N each row is also estimated by Monte Carlo and a z-score is shown.
"""
import argparse
import math

from crossings import covariance as cov
from crossings.crossing_moments import second_factorial_moment
from crossings.simulate import mc_moments


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--model", default="gaussian(1)")
    p.add_argument("--levels", type=float, nargs="+", default=[0.0, 1.0])
    p.add_argument("--horizons", type=float, nargs="+", default=[1.0, 3.0, 10.0])
    p.add_argument("--paths", type=int, default=0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=1)
    args = p.parse_args()
    model = cov.parse_covariance(args.model)
    head = f"{'t':>6} {'x':>6} {'E[N]':>10} {'M2':>12} {'Var':>12} {'quad_err':>9}"
    print(head + (f" {'MC M2':>12} {'se':>9} {'z':>7}" if args.paths else ""))
    for t in args.horizons:
        for x in args.levels:
            r = second_factorial_moment(model, x, t)
            line = (f"{t:6g} {x:6g} {r.rice_mean:10.6f} {r.m2:12.6f} {r.variance:12.6f} "
                    f"{r.quad_error:9.1e}")
            if args.paths:
                mc = mc_moments(model, x, t, args.dt, args.paths, args.seed)
                se = math.hypot(mc.se_second_factorial, r.quad_error)
                line += f" {mc.second_factorial:12.6f} {se:9.2e} {(r.m2 - mc.second_factorial) / se:7.2f}"
            print(line)


if __name__ == "__main__":
    main()
