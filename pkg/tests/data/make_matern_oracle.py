"""Regenerate matern_oracle.json: c_s rho^nu K_nu(rho) at 50 significant digits.

Run once offline: python tests/data/make_matern_oracle.py
"""

import json
from pathlib import Path

import mpmath as mp
import numpy as np

mp.mp.dps = 50


def reference(nu, rho):
    nu, rho = mp.mpf(nu), mp.mpf(rho)
    c = mp.power(2, 1 - nu) / mp.gamma(nu)
    return c * mp.power(rho, nu) * mp.besselk(nu, rho)


def main():
    rng = np.random.default_rng(20240607)
    # log-uniform radii cover both the near-diagonal and the tail regime
    radii = 10.0 ** rng.uniform(-4, np.log10(30.0), 100)
    table = {}
    for nu in ("0.5", "1.5", "2.5", "3.5"):
        table[nu] = [[repr(float(r)), mp.nstr(reference(nu, repr(float(r))), 30)] for r in radii]
    out = Path(__file__).with_name("matern_oracle.json")
    out.write_text(json.dumps({"digits": 50, "rows": table}, indent=1))


if __name__ == "__main__":
    main()
