"""Empirical Var(N) as the grid spacing shrinks, for a model where the
integrability test holds and one where it fails."""
import argparse

from crossings import covariance as cov
from crossings.diagnostics import classify_geman
from crossings.simulate import divergence_probe


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--paths", type=int, default=2000)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--level", type=float, default=0.0)
    p.add_argument("--dts", type=float, nargs="+", default=[1e-2, 1e-3, 1e-4])
    p.add_argument("--seed", type=int, default=7)
    args = p.parse_args()
    for name, model in (("gaussian(0.25)", cov.gaussian(0.25)), ("dyadic(1.5)", cov.dyadic(1.5))):
        verdict = classify_geman(model).verdict
        print(f"{name}: {verdict}")
        print(f"{'dt':>8} {'Var(N)':>10} {'se':>8} {'E[N]':>8}")
        for row in divergence_probe(model, args.level, args.t, args.dts, args.paths, args.seed):
            print(f"{row.dt:8g} {row.variance:10.4f} {row.se_variance:8.4f} {row.mean_count:8.4f}")
        print()


if __name__ == "__main__":
    main()
