"""Integrability verdicts and fitted exponents for a set of covariance models."""
import argparse

from crossings import covariance as cov
from crossings.diagnostics import classify_geman

MODELS = {
    "gaussian(1)": lambda: cov.gaussian(),
    "cosine()": lambda: cov.cosine(),
    "matern32(1)": lambda: cov.matern32(),
    "matern52(1)": lambda: cov.matern52(),
    "dyadic(1.5)": lambda: cov.dyadic(1.5),
    "dyadic(3)": lambda: cov.dyadic(3.0),
    "theta''=1/|log tau|": lambda: cov.synthetic("1/(-log(tau))"),
    "theta''=1/log^2 tau": lambda: cov.synthetic("1/log(tau)^2"),
    "theta''=tau^0.5": lambda: cov.synthetic("tau^0.5"),
}


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--margin", type=float, default=0.05)
    args = p.parse_args()
    print(f"{'model':<22} {'alpha':>9} {'beta':>9} {'integral':>11}  verdict")
    for name, make in MODELS.items():
        rep = classify_geman(make(), margin=args.margin)
        print(f"{name:<22} {rep.local_exponent:9.4f} {rep.log_exponent:9.4f} "
              f"{rep.integral_estimate:11.4g}  {rep.verdict}")


if __name__ == "__main__":
    main()
