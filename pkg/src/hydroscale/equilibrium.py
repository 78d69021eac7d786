"""Product invariant measures of the lattice gas.

The single-site marginal at fugacity ``lam`` puts weight
``lam**k * prod(h(0..k-1)) / prod(g(1..k))`` on occupancy k, normalized by
the partition function Z(lam).  The density map ``rho(lam)`` is strictly
increasing, hence invertible, on [0, lambda_c).  The homogenized rates

    Phi(rho) = E[g(eta)]    and    Psi(rho) = E[h(eta)]

under the marginal at density rho define the macroscopic flux Phi*Psi used
by both hydrodynamic solvers.

All series are truncated adaptively so the dropped tail mass is below
``eps_tail``; weights are handled in log space to avoid overflow.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import ConvergenceError, DomainError
from .rates import RateModel

__all__ = [
    "EquilibriumTable",
    "marginal_pmf",
    "density_of_lambda",
    "lambda_of_density",
    "phi",
    "psi",
    "sample_occupation",
    "fem_check",
]

_MAX_SUPPORT = 1 << 20
_RHO_SOLVE_TOL = 1e-13  # residual target for the fugacity bisection


class EquilibriumTable:
    """Cached equilibrium quantities for one rate model."""

    def __init__(self, model: RateModel, eps_tail: float = 1e-12):
        self.model = model
        self.eps_tail = float(eps_tail)
        self.lambda_c, self.lambda_c_estimated = self._lambda_c()
        self.rho_c = model.m0  # inf when h never vanishes
        self._logc = self._log_coeffs(max(64, model.g_table.size + 2))
        self._density_maps: dict = {}

    # -- series machinery ---------------------------------------------------

    def _lambda_c(self):
        m = self.model
        if math.isfinite(m.m0):
            return math.inf, False
        if m.g_slope > 0.0:
            # g grows without bound while h stays at its last table value.
            return math.inf, False
        ks = np.arange(m.h_table.size // 2, max(m.h_table.size, 4))
        g = np.asarray(m.g(ks + 1), dtype=float)
        h = np.asarray(m.h(ks), dtype=float)
        ratios = g[h > 0] / h[h > 0]
        limit = float(m.g(10 ** 9)) / float(m.h(10 ** 9))
        lam_c = min(limit, float(np.min(ratios))) if ratios.size else limit
        return lam_c, True

    def _log_coeffs(self, size: int) -> np.ndarray:
        """log of prod(h(0..k-1))/prod(g(1..k)) for k = 0..size-1."""
        m = self.model
        ks = np.arange(size)
        with np.errstate(divide="ignore"):
            logh = np.log(np.asarray(m.h(ks), dtype=float))
            logg = np.log(np.asarray(m.g(ks + 1), dtype=float))
        out = np.empty(size)
        out[0] = 0.0
        out[1:] = np.cumsum(logh[:-1] - logg[:-1])[: size - 1]
        return out

    def _coeffs_upto(self, k: int) -> np.ndarray:
        if self._logc.size <= k:
            self._logc = self._log_coeffs(k + 1)
        return self._logc[: k + 1]

    def support_size(self, lam: float) -> int:
        """Smallest truncation K with bounded tail mass below eps_tail."""
        m = self.model
        if math.isfinite(m.m0):
            return int(m.m0)
        table_len = max(m.g_table.size, m.h_table.size)
        k = max(64, 2 * table_len)
        while k <= _MAX_SUPPORT:
            logc = self._coeffs_upto(k)
            lw = logc + np.arange(k + 1) * (math.log(lam) if lam > 0 else -math.inf)
            w = np.exp(lw - np.max(lw))
            total = float(np.sum(w))
            ratio = lam * float(m.h(k - 1)) / float(m.g(k))
            if k >= table_len and ratio >= 1.0 and m.g_slope == 0.0:
                raise ConvergenceError(
                    f"marginal series diverges at lam = {lam} (ratio {ratio:.3g})"
                )
            # Past the tables the term ratio is nonincreasing, so a geometric
            # bound on the dropped tail is valid.
            if k >= table_len and ratio < 1.0:
                tail = w[k] * ratio / (1.0 - ratio)
                if tail <= self.eps_tail * total:
                    return k
            k *= 2
        raise ConvergenceError(f"marginal series not Cauchy within budget at lam = {lam}")

    def log_weights(self, lam: float, k: int) -> np.ndarray:
        logc = self._coeffs_upto(k)
        if lam == 0.0:
            lw = np.full(k + 1, -math.inf)
            lw[0] = 0.0
            return lw
        return logc + np.arange(k + 1) * math.log(lam)

    def log_z(self, lam: float) -> float:
        self._check_lambda(lam)
        k = self.support_size(lam)
        lw = self.log_weights(lam, k)
        m = float(np.max(lw))
        return m + math.log(float(np.sum(np.exp(lw - m))))

    def _check_lambda(self, lam: float):
        if not 0.0 <= lam < self.lambda_c:
            raise DomainError(f"lam = {lam} outside [0, lambda_c = {self.lambda_c})")

    def _check_rho(self, rho: float):
        if rho < 0.0 or rho > self.rho_c or (rho == self.rho_c and math.isinf(self.rho_c)):
            raise DomainError(f"rho = {rho} outside [0, rho_c = {self.rho_c}]")

    # -- marginal and density map -------------------------------------------

    def pmf(self, lam: float) -> np.ndarray:
        self._check_lambda(lam)
        k = self.support_size(lam)
        lw = self.log_weights(lam, k)
        w = np.exp(lw - np.max(lw))
        return w / np.sum(w)

    def rho_of_lambda(self, lam: float) -> float:
        p = self.pmf(lam)
        return float(np.dot(np.arange(p.size), p))

    def lambda_of_rho(self, rho: float) -> float:
        self._check_rho(rho)
        if rho == 0.0:
            return 0.0
        if rho == self.rho_c:  # point mass at the max occupancy
            return math.inf
        lo, hi = 0.0, self._upper_bracket(rho)
        lam, res = hi, self.rho_of_lambda(hi) - rho
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            r = self.rho_of_lambda(mid) - rho
            if abs(r) < abs(res):
                lam, res = mid, r
            if abs(r) <= _RHO_SOLVE_TOL:
                return mid
            if r < 0.0:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-16 * max(1.0, hi):
                break
        if abs(res) > 1e-10:
            raise ConvergenceError(f"fugacity bisection stalled at rho = {rho}")
        return lam

    def _upper_bracket(self, rho: float) -> float:
        if math.isinf(self.lambda_c):
            hi = 1.0
            for _ in range(200):
                if self.rho_of_lambda(hi) >= rho:
                    return hi
                hi *= 2.0
        else:
            for j in range(1, 60):
                hi = self.lambda_c * (1.0 - 0.5 ** j)
                if self.rho_of_lambda(hi) >= rho:
                    return hi
        raise ConvergenceError(f"could not bracket rho = {rho}")

    # -- vectorized paths (profile sampling, flux tables) --------------------

    def pmf_matrix(self, lams: np.ndarray) -> np.ndarray:
        """Row i is the marginal pmf at lams[i]; shared truncation."""
        lams = np.asarray(lams, dtype=float)
        lam_max = float(np.max(lams)) if lams.size else 0.0
        k = self.support_size(lam_max) if lam_max > 0 else 1
        logc = self._coeffs_upto(k)
        with np.errstate(divide="ignore"):
            loglam = np.where(lams > 0, np.log(np.maximum(lams, 1e-300)), -math.inf)
        lw = logc[None, :] + np.arange(k + 1)[None, :] * loglam[:, None]
        lw[lams == 0.0, 0] = 0.0
        lw -= np.max(lw, axis=1, keepdims=True)
        w = np.exp(lw)
        return w / np.sum(w, axis=1, keepdims=True)

    def lambda_grid(self, rhos: np.ndarray) -> np.ndarray:
        """Vectorized fugacity inversion on a monotone density grid."""
        rhos = np.asarray(rhos, dtype=float)
        out = np.empty_like(rhos)
        interior = (rhos > 0) & (rhos < self.rho_c)
        out[rhos <= 0] = 0.0
        out[rhos >= self.rho_c] = math.inf
        if not np.any(interior):
            return out
        target = rhos[interior]
        hi0 = self._upper_bracket(float(np.max(target)))
        lo = np.zeros(target.size)
        hi = np.full(target.size, hi0)
        ks = None
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            p = self.pmf_matrix(mid)
            if ks is None or ks.size != p.shape[1]:
                ks = np.arange(p.shape[1], dtype=float)
            r = p @ ks - target
            below = r < 0.0
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        out[interior] = 0.5 * (lo + hi)
        return out

    def density_map(self, rho_max: float, n_points: int = 1025):
        """Monotone (rho, lambda) table with a PCHIP inverse, cached."""
        key = (round(float(rho_max), 12), int(n_points))
        if key not in self._density_maps:
            top = min(rho_max, self.rho_c)
            eff_top = top if math.isinf(self.rho_c) else min(top, self.rho_c * (1 - 1e-9))
            rho_nodes = np.linspace(0.0, eff_top, n_points)
            lam_nodes = self.lambda_grid(rho_nodes)
            interp = PchipInterpolator(rho_nodes, lam_nodes, extrapolate=False)
            self._density_maps[key] = (rho_nodes, lam_nodes, interp)
        return self._density_maps[key]

    def quantile_matrix(self, rhos: np.ndarray):
        """Per-entry marginal cdf rows for inverse-cdf sampling at the given
        densities.  Returns (cdf matrix, support values)."""
        rhos = np.asarray(rhos, dtype=float)
        top = float(np.max(rhos)) if rhos.size else 0.0
        if math.isfinite(self.rho_c) and top >= self.rho_c:
            # Degenerate top density: the marginal is a point mass at m0.
            lam = np.where(rhos >= self.rho_c, np.nan, 0.0)
            _, _, interp = self.density_map(max(self.rho_c * (1 - 1e-9), 1e-12))
            inner = rhos < self.rho_c
            lam_in = np.zeros(rhos.size)
            lam_in[inner] = interp(rhos[inner])
            p = self.pmf_matrix(lam_in)
            p[~inner] = 0.0
            p[~inner, -1] = 0.0
            m0 = int(self.model.m0)
            if p.shape[1] < m0 + 1:
                p = np.pad(p, ((0, 0), (0, m0 + 1 - p.shape[1])))
            p[~inner, m0] = 1.0
            del lam
        else:
            _, _, interp = self.density_map(max(top, 1e-12))
            lam_in = np.where(rhos > 0, interp(np.minimum(rhos, top)), 0.0)
            p = self.pmf_matrix(lam_in)
        cdf = np.cumsum(p, axis=1)
        cdf[:, -1] = 1.0
        return cdf, np.arange(p.shape[1])

    def draw_from_cdfs(self, cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Inverse-cdf draw per row; u has one uniform per row."""
        return (cdf < u[:, None]).sum(axis=1).astype(np.int64)


# -- module-level operations (thin wrappers with the documented contracts) ---

def marginal_pmf(table: EquilibriumTable, lam: float) -> np.ndarray:
    """Truncated single-site pmf at fugacity lam (normalized)."""
    return table.pmf(lam)


def density_of_lambda(table: EquilibriumTable, lam: float) -> float:
    """Mean occupancy at fugacity lam."""
    return table.rho_of_lambda(lam)


def lambda_of_density(table: EquilibriumTable, rho: float) -> float:
    """Inverse of the density map, by bracketing bisection."""
    return table.lambda_of_rho(rho)


def _pmf_at_rho(table: EquilibriumTable, rho: float) -> np.ndarray:
    table._check_rho(rho)
    if rho == table.rho_c:  # finite m0 only: point mass at the ceiling
        p = np.zeros(int(table.model.m0) + 1)
        p[-1] = 1.0
        return p
    return table.pmf(table.lambda_of_rho(rho))


def phi(table: EquilibriumTable, rho: float) -> float:
    """Homogenized departure rate E[g(eta)] at density rho."""
    p = _pmf_at_rho(table, rho)
    return float(np.dot(np.asarray(table.model.g(np.arange(p.size)), dtype=float), p))


def psi(table: EquilibriumTable, rho: float) -> float:
    """Homogenized acceptance factor E[h(eta)] at density rho."""
    p = _pmf_at_rho(table, rho)
    return float(np.dot(np.asarray(table.model.h(np.arange(p.size)), dtype=float), p))


def sample_occupation(table: EquilibriumTable, rho: float, rng, size=None):
    """Draw occupancies from the marginal at density rho (inverse cdf)."""
    p = _pmf_at_rho(table, rho)
    cdf = np.cumsum(p)
    cdf[-1] = 1.0
    if size is None:
        return int(np.searchsorted(cdf, rng.random(), side="right"))
    return np.searchsorted(cdf, rng.random(size), side="right").astype(np.int64)


def fem_check(table: EquilibriumTable, gamma: float, lam: float):
    """Numerically test whether E[exp(gamma * eta)] = Z(lam e^gamma)/Z(lam)
    converges.  Returns (True, value) or (False, None)."""
    if gamma < 0:
        raise DomainError("gamma must be nonnegative")
    table._check_lambda(lam)
    lam_up = lam * math.exp(gamma)
    try:
        k = table.support_size(lam_up)
    except ConvergenceError:
        return False, None
    lw = table.log_weights(lam_up, k)
    m = float(np.max(lw))
    log_z_up = m + math.log(float(np.sum(np.exp(lw - m))))
    return True, math.exp(log_z_up - table.log_z(lam))
