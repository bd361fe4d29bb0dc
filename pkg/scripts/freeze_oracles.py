#!/usr/bin/env python3
"""Recompute the frozen reference values used by the test suite.

Every value comes from adaptive quadrature plus bisection (tests/oracles.py),
never from the package under test.
"""

import math
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from oracles import beta_mean_quad, incomplete_beta_quad, inverse_beta_oracle, normal_cdf_quad  # noqa: E402


def main():
    rows = [
        ("normal cdf at 1", normal_cdf_quad(1.0)),
        ("normal quantile at 0.975", _bisect_normal(0.975)),
        ("I_0.3(2, 5)", incomplete_beta_quad(0.3, 2.0, 5.0)),
        ("beta(2, 5) quantile at 0.9", inverse_beta_oracle(0.9, 2.0, 5.0)),
        ("100 * beta(1.5, 1.5) quantile at 0.9", 100 * inverse_beta_oracle(0.9, 1.5, 1.5)),
        ("combined draw z for (0.8413447, 0.5, 1, 1)",
         normal_cdf_quad(_bisect_normal(0.8413447) * 0.5 / math.sqrt(0.5))),
        ("clamped beta mean (alpha = beta = 1.00015e-4)", beta_mean_quad(1.00015e-4, 1.00015e-4)),
    ]
    for name, value in rows:
        print(f"{name:48s} {value!r}")


def _bisect_normal(p, lo=-40.0, hi=40.0):
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if normal_cdf_quad(mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


if __name__ == "__main__":
    main()
