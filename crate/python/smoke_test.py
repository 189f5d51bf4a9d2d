"""Smoke test for the pyhblasso extension.

Build and install first:

    pip install maturin
    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install dist/pyhblasso-*.whl
"""

import math
import sys

import numpy as np
from scipy import special, stats

import pyhblasso as hb


def check(label, ok):
    print(f"{'ok  ' if ok else 'FAIL'} {label}")
    return ok


def main():
    results = []

    for nu, x in [(0.5, 0.3), (1.0, 2.5), (3.7, 40.0)]:
        want = math.log(special.kve(nu, x))
        got = hb.log_bessel_k_scaled(nu, x)
        results.append(check(f"log K scaled nu={nu} x={x}", abs(got - want) < 1e-10 * max(1, abs(want))))

    got = hb.hyperbolic_loss(2.0, 1.5, 0.5)
    results.append(check("hyperbolic loss", abs(got - (math.sqrt(1.5 * (1.5 + 8.0)) - 1.5)) < 1e-12))

    draws = np.array(hb.sample_gig(1.0, 2.0, 3.0, size=40000, seed=7))
    ref = stats.geninvgauss(p=1.0, b=math.sqrt(6.0), scale=math.sqrt(1.5))
    se = ref.std() / math.sqrt(draws.size)
    results.append(check("GIG sample mean", abs(draws.mean() - ref.mean()) < 5 * se))

    g = hb.solve_ab(50, 80.0)
    results.append(check("gamma approximation converged", g["converged"] and g["shape"] > 0 and g["rate"] > 0))

    data, truth = hb.simulate_scenario(1, 60, rep=0, seed=3)
    data = data.standardize()
    results.append(check("simulated data shape", (data.n, data.p) == (60, len(truth) - 1)))

    cfg = hb.FitConfig("hbl", iterations=1500, burn_in=500, seed=11)
    post = hb.fit(data, cfg)
    again = hb.fit(data, cfg)
    results.append(check("stored draws", len(post) == cfg.stored_draws))
    results.append(check("same seed reproduces draws", post.draws == again.draws))
    rows = post.summary()
    results.append(check("summary covers every parameter", [r["name"] for r in rows] == post.names))
    results.append(check("summary intervals ordered", all(r["lower"] <= r["median"] <= r["upper"] for r in rows)))

    try:
        hb.FitConfig("nope")
        results.append(check("unknown method rejected", False))
    except ValueError:
        results.append(check("unknown method rejected", True))

    print(f"{sum(results)}/{len(results)} checks passed")
    return 0 if all(results) else 1


if __name__ == "__main__":
    sys.exit(main())
