"""Microscopic jump rates of the decomposable lattice gas.

A model is a pair of nonnegative functions (g, h) on occupation numbers:
a particle leaves a site holding k particles at rate g(k) and is accepted
at a site holding m particles with modulation h(m).  Simple exclusion and
zero-range dynamics are the two named special cases.

Rates are stored as tables.  Beyond the table, g continues linearly with
slope ``kappa`` (keeping it Lipschitz) and h continues at its last value
(keeping it bounded).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "RateModel",
    "zero_range",
    "bounded_zero_range",
    "exclusion",
    "tabulated",
    "validate_rates",
    "check_attractive",
]

# Tables are floats; identities like the product-measure compatibility are
# checked up to this slack to absorb roundoff in user-supplied tables.
_EQ_TOL = 1e-12


@dataclass(frozen=True)
class RateModel:
    """Rate pair (g, h) with its structural constants.

    kappa   : Lipschitz constant of g
    h_sup   : sup of h (the thinning bound uses it)
    m0      : max occupancy, smallest m with h(m) = 0; math.inf if none
    g_slope : slope used to continue g past the table, in [0, kappa]
    attractive : g nondecreasing and h nonincreasing on the table
    """

    name: str
    g_table: np.ndarray
    h_table: np.ndarray
    kappa: float
    h_sup: float
    m0: float
    attractive: bool
    g_slope: float

    def g(self, k):
        """Departure rate g(k), vectorized; linear extrapolation past the table."""
        k = np.asarray(k)
        last = self.g_table.size - 1
        idx = np.minimum(k, last)
        out = self.g_table[idx] + self.g_slope * (k - idx)
        return out if out.ndim else float(out)

    def h(self, m):
        """Destination modulation h(m), vectorized; constant past the table."""
        m = np.asarray(m)
        idx = np.minimum(m, self.h_table.size - 1)
        out = self.h_table[idx]
        return out if out.ndim else float(out)

    def rate(self, k, m):
        """Jump rate factor b(k, m) = g(k) h(m)."""
        return self.g(k) * self.h(m)


def _finish(name, g_table, h_table, kappa=None, h_sup=None, g_slope=None):
    g_table = np.asarray(g_table, dtype=float)
    h_table = np.asarray(h_table, dtype=float)
    if kappa is None:
        kappa = float(np.max(np.abs(np.diff(g_table)))) if g_table.size > 1 else 0.0
    if h_sup is None:
        h_sup = float(np.max(h_table))
    if g_slope is None:
        g_slope = kappa
    if not 0.0 <= g_slope <= kappa + _EQ_TOL:
        raise ValueError(f"g_slope {g_slope} must lie in [0, kappa={kappa}]")
    zeros = np.nonzero(h_table == 0.0)[0]
    m0 = float(zeros[0]) if zeros.size else math.inf
    attractive = bool(
        np.all(np.diff(g_table) >= 0.0) and np.all(np.diff(h_table) <= 0.0)
    )
    return RateModel(
        name, g_table, h_table, float(kappa), float(h_sup), m0, attractive,
        float(g_slope),
    )


def zero_range(k_max: int = 64) -> RateModel:
    """Zero-range rates g(k) = k, h = 1."""
    g = np.arange(k_max + 1, dtype=float)
    h = np.ones(k_max + 1)
    return _finish("zero_range", g, h, kappa=1.0, h_sup=1.0)


def bounded_zero_range(cap: int, k_max: int = 64) -> RateModel:
    """Zero-range rates g(k) = min(k, cap), h = 1."""
    g = np.minimum(np.arange(k_max + 1, dtype=float), float(cap))
    h = np.ones(k_max + 1)
    return _finish(f"bounded_zero_range({cap})", g, h, kappa=1.0, h_sup=1.0,
                   g_slope=0.0)


def exclusion() -> RateModel:
    """Simple exclusion: g(k) = 1 for k >= 1, h(m) = 1 for m = 0."""
    g = np.array([0.0, 1.0, 1.0])
    h = np.array([1.0, 0.0, 0.0])
    return _finish("exclusion", g, h, kappa=1.0, h_sup=1.0, g_slope=0.0)


def tabulated(g_table, h_table, name: str = "tabulated", kappa=None, h_sup=None,
              g_slope=None) -> RateModel:
    """User-supplied rate tables; kappa and h_sup are recomputed from the
    tables when not given (supplied values are never trusted blindly:
    they are still checked by validate_rates)."""
    return _finish(name, g_table, h_table, kappa=kappa, h_sup=h_sup,
                   g_slope=g_slope)


def validate_rates(model: RateModel, k_max: int) -> list[str]:
    """Check the structural assumptions on (g, h) up to occupancy k_max.

    Returns a list of human-readable violations (empty when the model is
    valid).  Violations are data, not exceptions: each entry names the
    failed condition and the first offending index.
    """
    if k_max < 2:
        raise ValueError("k_max must be at least 2")
    report: list[str] = []
    ks = np.arange(k_max + 1)
    g = np.asarray(model.g(ks), dtype=float)
    h = np.asarray(model.h(ks), dtype=float)

    if g[0] != 0.0:
        report.append(f"g(0) = {g[0]} must be 0")
    if h[0] <= 0.0:
        report.append(f"h(0) = {h[0]} must be positive")

    pos_range = int(min(k_max, model.m0)) if math.isfinite(model.m0) else k_max
    for k in range(1, pos_range + 1):
        if g[k] <= 0.0:
            report.append(f"g({k}) = {g[k]} must be positive for 1 <= k <= M0")
            break

    if math.isfinite(model.m0):
        m0 = int(model.m0)
        bad = [m for m in range(m0, k_max + 1) if h[m] != 0.0]
        if bad:
            report.append(f"h({bad[0]}) = {h[bad[0]]} must be 0 for m >= M0 = {m0}")
        bad = [m for m in range(m0) if h[m] <= 0.0]
        if bad:
            report.append(f"h({bad[0]}) = {h[bad[0]]} must be positive below M0 = {m0}")

    steps = np.abs(np.diff(g))
    over = np.nonzero(steps > model.kappa + _EQ_TOL)[0]
    if over.size:
        k = int(over[0])
        report.append(f"|g({k + 1}) - g({k})| = {steps[k]} exceeds kappa = {model.kappa}")
    over = np.nonzero(g > model.kappa * ks + _EQ_TOL)[0]
    if over.size:
        k = int(over[0])
        report.append(f"g({k}) = {g[k]} exceeds kappa*k = {model.kappa * k}")
    over = np.nonzero(h > model.h_sup + _EQ_TOL)[0]
    if over.size:
        m = int(over[0])
        report.append(f"h({m}) = {h[m]} exceeds h_sup = {model.h_sup}")

    # Product-measure compatibility: g(i)h(j) - g(j)h(i) = h(0)(g(i) - g(j)).
    # Both sides are antisymmetric in (i, j), so pairs j < i suffice.
    cmp_range = int(min(k_max, model.m0)) if math.isfinite(model.m0) else k_max
    done = False
    for i in range(1, cmp_range + 1):
        for j in range(i):
            lhs = g[i] * h[j] - g[j] * h[i]
            rhs = h[0] * (g[i] - g[j])
            scale = max(1.0, abs(lhs), abs(rhs))
            if abs(lhs - rhs) > _EQ_TOL * scale:
                report.append(
                    f"compatibility fails at (i,j)=({i},{j}): "
                    f"g(i)h(j)-g(j)h(i) = {lhs} but h(0)(g(i)-g(j)) = {rhs}"
                )
                done = True
                break
        if done:
            break
    return report


def check_attractive(model: RateModel, k_max: int) -> bool:
    """True iff g is nondecreasing and h is nonincreasing on [0, k_max]."""
    if k_max < 2:
        raise ValueError("k_max must be at least 2")
    ks = np.arange(k_max + 1)
    g = np.asarray(model.g(ks), dtype=float)
    h = np.asarray(model.h(ks), dtype=float)
    return bool(np.all(np.diff(g) >= 0.0) and np.all(np.diff(h) <= 0.0))
