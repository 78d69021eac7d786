"""Event-driven simulation of the lattice gas on a finite torus window.

The torus has side ``window_factor * N`` so the varying part of the initial
profile occupies the center and the seam sees only the flat far field.
Microscopic time is related to macroscopic time through the regime-dependent
speedup gamma_N.  A ``no_wrap`` mode rejects displacements that would cross
the window edge, which turns the torus into a box with frozen exterior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import engine
from .equilibrium import EquilibriumTable
from .errors import BudgetError, DomainError
from .kernel import JumpKernel, build_kernel, gamma_n_scale
from .rates import RateModel

__all__ = [
    "Configuration",
    "EmpiricalField",
    "EventRecord",
    "ProfileSampler",
    "init_from_profile",
    "step",
    "run_until",
    "block_average",
    "young_histogram",
]

_NO_BUDGET = 1 << 62


def _strides(side: int, dim: int) -> np.ndarray:
    return np.array([side ** (dim - 1 - i) for i in range(dim)], dtype=np.int64)


def site_coords(side: int, dim: int, scale_n: int) -> np.ndarray:
    """Macroscopic coordinates (site count, dim) of all torus sites; the
    window is centered so coordinates run over [-side/2N, side/2N)."""
    axes = [(np.arange(side) - side // 2) / scale_n] * dim
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


@dataclass
class Configuration:
    """Occupancies on the torus plus the event-engine state."""

    model: RateModel
    kernel: JumpKernel
    side: int
    scale_n: int
    occupancy: np.ndarray          # flat int64, length side**dim
    tree: np.ndarray               # Fenwick tree over g(occupancy)
    micro_time: float = 0.0
    no_wrap: bool = False
    counters: np.ndarray = None    # int64[2]: proposals, accepted

    def __post_init__(self):
        if self.counters is None:
            self.counters = np.zeros(2, dtype=np.int64)
        self._strides = _strides(self.side, self.kernel.dim)

    @property
    def dim(self) -> int:
        return self.kernel.dim

    @property
    def gamma_n(self) -> float:
        return gamma_n_scale(self.kernel.alpha, self.scale_n)

    @property
    def macro_time(self) -> float:
        return self.micro_time / self.gamma_n

    @property
    def occupancies(self) -> np.ndarray:
        """Occupancy array shaped (side,) * dim (a view)."""
        return self.occupancy.reshape((self.side,) * self.dim)

    @property
    def n_particles(self) -> int:
        return int(self.occupancy.sum())

    @property
    def acceptance_ratio(self) -> float:
        p = int(self.counters[0])
        return float(self.counters[1]) / p if p else float("nan")

    def site_weights(self) -> np.ndarray:
        return np.asarray(self.model.g(self.occupancy), dtype=float)

    def weight_index_drift(self) -> float:
        """|maintained total - recomputed total|; 0 for integer-valued g."""
        return abs(engine.fenwick_total(self.tree) - float(self.site_weights().sum()))

    def copy(self) -> "Configuration":
        return Configuration(self.model, self.kernel, self.side, self.scale_n,
                             self.occupancy.copy(), self.tree.copy(),
                             self.micro_time, self.no_wrap, self.counters.copy())

    @classmethod
    def from_occupancies(cls, model: RateModel, kernel: JumpKernel, occ,
                         scale_n: int, no_wrap: bool = False) -> "Configuration":
        occ = np.asarray(occ, dtype=np.int64)
        side = occ.shape[0]
        if occ.shape != (side,) * kernel.dim:
            raise DomainError(f"occupancy shape {occ.shape} is not a torus of dim {kernel.dim}")
        if 2 * kernel.d_max > side:
            raise DomainError("kernel truncation must not exceed half the torus side")
        flat = occ.ravel().copy()
        weights = np.asarray(model.g(flat), dtype=float)
        tree = engine.fenwick_build(weights)
        return cls(model, kernel, side, scale_n, flat, tree, no_wrap=no_wrap)

    def _engine_args(self):
        m = self.model
        m0 = int(m.m0) if math.isfinite(m.m0) else -1
        k = self.kernel
        return (m.g_table, m.g_slope, m.h_table, m.h_sup, m0,
                k.displacements, k.alias_prob, k.alias_idx,
                self._strides, self.side, self.dim, k.w_trunc, self.no_wrap)


@dataclass(frozen=True)
class EventRecord:
    origin: tuple
    displacement: tuple
    accepted: bool
    micro_time: float


class ProfileSampler:
    """Product-measure sampler for a fixed vector of site densities.

    The per-site inverse cdfs are precomputed once, so replicas are cheap;
    a shared uniform per site routed through two samplers realizes the
    comonotone coupling used by the coupled process.
    """

    def __init__(self, table: EquilibriumTable, rho_values: np.ndarray):
        rho_values = np.asarray(rho_values, dtype=float)
        if np.any(rho_values < 0) or np.any(rho_values > table.rho_c):
            raise DomainError("profile density outside [0, rho_c]")
        if math.isinf(table.rho_c) and not np.all(np.isfinite(rho_values)):
            raise DomainError("profile density must be finite")
        self.table = table
        self.rho_values = rho_values
        self.cdf, self.support = table.quantile_matrix(rho_values)

    def draw(self, rng) -> np.ndarray:
        return self.from_uniforms(rng.random(self.rho_values.size))

    def from_uniforms(self, u: np.ndarray) -> np.ndarray:
        return self.table.draw_from_cdfs(self.cdf, u)


def flatten_profile(rho0, coords: np.ndarray, rho_star: float,
                    half_width: float, fraction: float = 0.1) -> np.ndarray:
    """Evaluate the profile and blend it smoothly to rho_star over the outer
    ``fraction`` of the window so the torus seam sees the constant value."""
    u = coords if coords.ndim == 1 else coords
    vals = np.asarray(rho0(u), dtype=float)
    inner = (1.0 - fraction) * half_width
    t = (np.abs(coords) - inner) / (half_width - inner)
    t = np.clip(t, 0.0, 1.0)
    s = t * t * (3.0 - 2.0 * t)  # smoothstep
    keep = np.prod(1.0 - s, axis=-1) if coords.ndim > 1 else 1.0 - s
    return rho_star + (vals - rho_star) * keep


def init_from_profile(model: RateModel, table: EquilibriumTable, rho0,
                      scale_n: int, rng, *, alpha: float = None,
                      kernel: JumpKernel = None, dim: int = 1,
                      window_factor: float = 4.0, rho_star: float = None,
                      no_wrap: bool = False, flatten: bool = None,
                      sampler: ProfileSampler = None) -> Configuration:
    """Draw a product-measure initial configuration with site means
    rho0(x/N) and wrap it in a ready-to-run Configuration.

    rho0 takes macroscopic coordinates (an array for dim=1, an (M, dim)
    array otherwise).  Unless flatten=False (the default in no_wrap mode),
    the profile is blended to rho_star over the outer 10% of the window.
    """
    if kernel is None:
        if alpha is None:
            raise DomainError("either a kernel or alpha must be given")
        side = int(round(window_factor * scale_n))
        kernel = build_kernel(dim, alpha, side // 2)
    else:
        dim = kernel.dim
        side = int(round(window_factor * scale_n))
    if flatten is None:
        flatten = not no_wrap
    coords = site_coords(side, dim, scale_n)
    if dim == 1:
        coords = coords[:, 0]
    if sampler is None:
        if flatten:
            if rho_star is None:
                raise DomainError("flattening requires rho_star")
            rhos = flatten_profile(rho0, coords, rho_star, side / (2 * scale_n))
        else:
            rhos = np.asarray(rho0(coords), dtype=float)
        sampler = ProfileSampler(table, rhos)
    occ = sampler.draw(rng).reshape((side,) * dim)
    return Configuration.from_occupancies(model, kernel, occ, scale_n, no_wrap)


def step(config: Configuration, rng) -> EventRecord:
    """One thinning proposal: advances time, applies the move if accepted.

    On a frozen configuration time advances to +inf and a rejected record
    with origin None is returned.
    """
    status, t, x, j, acc = engine.one_proposal(
        config.occupancy, config.tree, config.micro_time,
        *config._engine_args(), rng, config.counters)
    config.micro_time = t
    if status == engine.STATUS_FROZEN:
        return EventRecord(None, None, False, t)
    if status == engine.STATUS_CEILING:
        raise AssertionError("occupancy ceiling M0 exceeded")
    origin = np.unravel_index(x, (config.side,) * config.dim)
    disp = tuple(int(v) for v in config.kernel.displacements[j])
    return EventRecord(tuple(int(c) for c in origin), disp, bool(acc), t)


def run_until(config: Configuration, t_macro: float, rng,
              max_proposals: int = None) -> Configuration:
    """Apply every event with micro time <= t_macro * gamma_N."""
    if t_macro < config.macro_time:
        raise DomainError("cannot run backwards in time")
    target = t_macro * config.gamma_n
    if max_proposals is None:
        budget = _NO_BUDGET
    else:
        budget = config.counters[0] + max_proposals
    status, t = engine.run_events(
        config.occupancy, config.tree, config.micro_time, target,
        *config._engine_args(), budget, rng, config.counters)
    config.micro_time = t
    if status == engine.STATUS_BUDGET:
        raise BudgetError(f"proposal budget exhausted at micro time {t}", partial=config)
    if status == engine.STATUS_CEILING:
        raise AssertionError("occupancy ceiling M0 exceeded")
    return config


@dataclass(frozen=True)
class EmpiricalField:
    """Block-averaged occupancy field on the torus."""

    l: int
    scale_n: int
    block_sums: np.ndarray   # int64, exact window sums, shape (side,)*dim
    values: np.ndarray       # block_sums / (2l+1)**dim

    @property
    def side(self) -> int:
        return self.block_sums.shape[0]

    def coords(self) -> np.ndarray:
        return site_coords(self.side, self.block_sums.ndim, self.scale_n)


def _circular_window_sums(arr: np.ndarray, l: int) -> np.ndarray:
    """Exact integer sums over centered windows of half-width l, per axis."""
    out = arr.astype(np.int64)
    if l == 0:
        return out.copy()
    for axis in range(arr.ndim):
        moved = np.moveaxis(out, axis, 0)
        ext = np.concatenate([moved[-l:], moved, moved[:l]], axis=0)
        c = np.concatenate([np.zeros((1,) + ext.shape[1:], dtype=np.int64),
                            np.cumsum(ext, axis=0)], axis=0)
        moved = c[2 * l + 1:] - c[:-(2 * l + 1)]
        out = np.moveaxis(moved, 0, axis)
    return out


def block_average(config: Configuration, l: int) -> EmpiricalField:
    """Mesoscopic field eta^l(x): exact mean occupancy over the cube of
    half-width l around each site (l = 0 returns raw occupancies)."""
    if not 0 <= l < config.side / 2:
        raise DomainError(f"block half-width {l} out of range for side {config.side}")
    occ = config.occupancies
    sums = _circular_window_sums(occ, l)
    values = sums / float((2 * l + 1) ** config.dim)
    return EmpiricalField(l, config.scale_n, sums, values)


def young_histogram(config: Configuration, l: int, bin_edges,
                    cells_per_axis: int) -> np.ndarray:
    """Distribution of block averages across a coarse macroscopic grid.

    Each coarse cell contributes the block average at its center site, so
    the counts sum to the number of coarse cells.  Values are clipped into
    the bin range so nothing is dropped.
    """
    bin_edges = np.asarray(bin_edges, dtype=float)
    if bin_edges.ndim != 1 or bin_edges.size < 2 or np.any(np.diff(bin_edges) <= 0):
        raise DomainError("bin_edges must be a strictly increasing 1-d array")
    if not 1 <= cells_per_axis <= config.side:
        raise DomainError("cells_per_axis out of range")
    field = block_average(config, l)
    width = config.side // cells_per_axis
    centers = (np.arange(cells_per_axis) * width + width // 2) % config.side
    mesh = np.meshgrid(*([centers] * config.dim), indexing="ij")
    vals = field.values[tuple(m.ravel() for m in mesh)]
    lo, hi = bin_edges[0], bin_edges[-1]
    vals = np.clip(vals, lo, np.nextafter(hi, lo))
    counts, _ = np.histogram(vals, bins=bin_edges)
    return counts
