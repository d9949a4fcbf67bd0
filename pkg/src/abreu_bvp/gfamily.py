"""The concave integrand family G(d) = d^theta / theta, with G = log d at theta = 0.

w = G' is the quantity the solver iterates on and Theta = w^{-1} maps
prescribed w-values back to Hessian determinants.  theta must satisfy
0 <= theta < 1/n; the logarithmic member is an explicit branch, not a limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


@dataclass(frozen=True)
class GSpec:
    """Family member: exponent theta and space dimension n."""

    theta: float
    n: int

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError(f"dimension n must be 1 or 2, got {self.n}")
        theta = float(self.theta)
        object.__setattr__(self, "theta", theta)
        if not math.isfinite(theta) or theta < 0.0 or theta >= 1.0 / self.n:
            raise ValueError(
                f"theta must lie in [0, 1/n) = [0, {1.0 / self.n}), got {theta}")


class GEval(NamedTuple):
    G: object
    w: object
    w_prime: object


def _check_positive(x, name):
    arr = np.asarray(x, dtype=float)
    if arr.size == 0:
        raise ValueError(f"{name} must be nonempty")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise ValueError(f"{name} must be positive and finite")
    return arr


def g_eval(spec: GSpec, d) -> GEval:
    """Evaluate (G, w, w') at d > 0.  Accepts scalars or arrays."""
    arr = _check_positive(d, "d")
    th = spec.theta
    if th == 0.0:
        G = np.log(arr)
        w = 1.0 / arr
        wp = -1.0 / arr**2
    else:
        G = arr**th / th
        w = arr ** (th - 1.0)
        wp = (th - 1.0) * arr ** (th - 2.0)
    if np.isscalar(d) or np.ndim(d) == 0:
        return GEval(float(G), float(w), float(wp))
    return GEval(G, w, wp)


def invert_w(spec: GSpec, w):
    """Theta(w): the d > 0 with G'(d) = w.  Accepts scalars or arrays."""
    arr = _check_positive(w, "w")
    if spec.theta == 0.0:
        d = 1.0 / arr
    else:
        d = arr ** (1.0 / (spec.theta - 1.0))
    if np.isscalar(w) or np.ndim(w) == 0:
        return float(d)
    return d


def verify_assumptions(spec: GSpec, sample_range, samples: int = 200) -> dict:
    """Check the three structure conditions on a sampled range of d.

    (A1) w' + (1 - 1/n) w/d <= 0; (A2) d*w bounded below by a positive c on
    d >= 1; (A3) d^{1-1/n} w increases without bound as d -> 0 (verified as a
    negative log-log slope on the sampled low end).
    """
    d_min, d_max = (float(v) for v in sample_range)
    if not (0.0 < d_min < d_max):
        raise ValueError("sample_range must satisfy 0 < d_min < d_max")
    ds = np.geomspace(d_min, d_max, samples)
    _, w, wp = g_eval(spec, ds)
    a1 = wp + (1.0 - 1.0 / spec.n) * w / ds
    a1_margin = float(np.max(a1))

    tail = ds[ds >= 1.0]
    if tail.size:
        a2_inf = float(np.min(tail * g_eval(spec, tail).w))
    else:
        a2_inf = math.inf  # vacuous: no sampled d >= 1
    a2_ok = a2_inf > 0.0

    low = np.geomspace(d_min, min(1.0, d_max), 50)
    t = low ** (1.0 - 1.0 / spec.n) * g_eval(spec, low).w
    slope = float(np.polyfit(np.log(low), np.log(t), 1)[0])

    return {
        "a1_margin": a1_margin,
        "a1_ok": a1_margin <= 0.0,
        "a2_infimum": a2_inf,
        "a2_ok": a2_ok,
        "a3_slope": slope,
        "a3_ok": slope < 0.0,
        "d_range": (d_min, d_max),
        "samples": int(samples),
    }
