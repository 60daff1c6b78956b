#!/usr/bin/env python3
"""Reference constants used by the unit tests, computed in high precision.

Run with mpmath and scipy installed; the printed values are pasted into
tests/unit/oracle_values.hpp.
"""
import mpmath as mp
import numpy as np
from scipy.optimize import minimize
from scipy.stats import norm

mp.mp.dps = 50


def phi_inv(p):
    p = mp.mpf(float(p))  # the double the test actually passes
    return mp.findroot(lambda u: mp.ncdf(u) - p, norm.ppf(float(p)), tol=p * mp.mpf("1e-40"))


def main():
    print("// normal quantile")
    for p in ["1e-300", "1e-20", "1e-10", "1e-5", "0.001", "0.025", "0.3", "0.5",
              "0.7", "0.975", "0.999999"]:
        print(f"{{{p}, {mp.nstr(phi_inv(p), 20)}}},")
    print("// normal cdf")
    for u in ["-8", "-6", "-3", "-1", "0", "0.5", "2", "5"]:
        print(f"{{{u}, {mp.nstr(mp.ncdf(mp.mpf(u)), 20)}}},")

    print("// product model, x = 0.5, D = 30, four active")
    y = mp.mpf(1)
    for j in range(30):
        lam = mp.mpf(1) if j < 4 else mp.mpf(500)
        y *= (4 * mp.mpf("0.5") - 2 + lam) / (1 + lam)
    print(mp.nstr(y, 20))

    print("// Phi(-3)")
    print(mp.nstr(mp.ncdf(-3), 20))
    print("// -Phi^-1(5.77e-3)")
    print(mp.nstr(-phi_inv(mp.mpf("5.77e-3")), 20))

    # FORM design point of the lower-tail product event, D = 30:
    # min ||u|| s.t. prod_j (4 Phi(u_j) - 2 + l_j)/(1 + l_j) <= -0.65.
    lam = np.array([1.0] * 4 + [500.0] * 26)

    def g(u):
        return -0.65 - np.prod((4 * norm.cdf(u) - 2 + lam) / (1 + lam))

    rng = np.random.default_rng(0)
    best = None
    for _ in range(100):
        u0 = rng.normal(size=30)
        res = minimize(lambda u: u @ u, u0, jac=lambda u: 2 * u,
                       constraints=[{"type": "ineq", "fun": g}], method="SLSQP",
                       options={"maxiter": 500, "ftol": 1e-14})
        if res.success and g(res.x) > -1e-9 and (best is None or res.fun < best.fun):
            best = res
    print("// FORM beta, lower-tail product event, D = 30")
    print(f"{np.sqrt(best.fun):.10f}")


if __name__ == "__main__":
    main()
