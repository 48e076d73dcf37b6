"""Mass-coordinate core: pseudo-inverse initial data and node dynamics.

The cumulative probabilities P_k are frozen at construction ("mass grid");
the unknowns are the node values Y_k(t) = e^(gamma t) X_k(t) of the rescaled
pseudo-inverse.  The semi-discrete right-hand side implements the interior
scheme with the zero-flux right boundary; node 0 is pinned at the origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .analytic import FellerParams

# A mass gap at or below this is treated as a vanished density between nodes.
_DP_FLOOR = 1e-15

MEAN_KINDS = ("arithmetic", "geometric")
STRATEGIES = ("log_spaced", "uniform", "custom")


class OrderingError(RuntimeError):
    """Node ordering violated (some Y_{k+1} - Y_k <= 0); reject the step."""


@dataclass(frozen=True)
class InitialCondition:
    """A unit-mass density on the half-line with its primitive.

    density    : x -> p0(x), vectorized, nonnegative
    primitive  : x -> P0(x) = int_0^x p0, vectorized, nondecreasing,
                 P0(0) = 0 and P0(x) -> 1
    descriptor : tagged provenance, e.g. {"kind": "double_exp", ...}
    """

    density: Callable[[np.ndarray], np.ndarray]
    primitive: Callable[[np.ndarray], np.ndarray]
    descriptor: dict = field(default_factory=dict)

    def pseudo_inverse(self, u, max_iter: int = 80):
        """Smallest x with P0(x) >= u, by vectorized bisection.

        u may be a scalar or an array with values in [0, 1).
        """
        u_arr = np.atleast_1d(np.asarray(u, dtype=float))
        if np.any(u_arr < 0.0) or np.any(u_arr >= 1.0):
            raise ValueError("quantile levels must lie in [0, 1)")
        hi_val = 1.0
        u_max = float(u_arr.max(initial=0.0))
        for _ in range(200):
            if self.primitive(hi_val) >= u_max:
                break
            hi_val *= 2.0
        else:
            raise ValueError("primitive never reaches the requested quantile level")
        lo = np.zeros_like(u_arr)
        hi = np.full_like(u_arr, hi_val)
        for _ in range(max_iter):
            mid = 0.5 * (lo + hi)
            below = self.primitive(mid) < u_arr
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        out = 0.5 * (lo + hi)
        return float(out[0]) if np.ndim(u) == 0 else out


def steady_ic(params: FellerParams, c1: float = 0.0, c2: float | None = None) -> InitialCondition:
    """The c1 = 0 steady state as a unit-mass initial density.

    Only c1 = 0 yields a normalizable nonnegative density (the E1 branch is
    either sign-changing or non-integrable), so c1 != 0 is rejected.  Any c2
    is normalized away; the density is (gamma/eta) e^(-gamma x / eta), which
    requires gamma > 0.
    """
    if c1 != 0.0:
        raise ValueError("steady initial conditions are only normalizable for c1 = 0")
    if params.gamma <= 0.0:
        raise ValueError("the steady density requires gamma > 0 to be normalizable")
    rate = params.gamma / params.eta

    def density(x):
        return rate * np.exp(-rate * np.asarray(x, dtype=float))

    def primitive(x):
        return -np.expm1(-rate * np.asarray(x, dtype=float))

    return InitialCondition(
        density, primitive, {"kind": "steady", "c1": c1, "c2": 1.0 if c2 is None else c2}
    )


def double_exp_ic(sigma1: float, sigma2: float, x0: float) -> InitialCondition:
    """Normalized two-scale exponential density.

    p0(x) = (e^(-x/sigma1) + e^(-(x - x0)/sigma2)) / (sigma1 + sigma2 e^(x0/sigma2)),
    with the closed-form primitive
    P0(x) = 1 - (sigma1 e^(-x/sigma1) + sigma2 e^(-(x - x0)/sigma2)) / (same).
    """
    if sigma1 <= 0.0 or sigma2 <= 0.0:
        raise ValueError("sigma1 and sigma2 must be positive")
    norm = sigma1 + sigma2 * math.exp(x0 / sigma2)

    def density(x):
        x = np.asarray(x, dtype=float)
        return (np.exp(-x / sigma1) + np.exp(-(x - x0) / sigma2)) / norm

    def primitive(x):
        x = np.asarray(x, dtype=float)
        return 1.0 - (sigma1 * np.exp(-x / sigma1) + sigma2 * np.exp(-(x - x0) / sigma2)) / norm

    return InitialCondition(
        density,
        primitive,
        {"kind": "double_exp", "sigma1": sigma1, "sigma2": sigma2, "x0": x0},
    )


def tabulated_ic(x, p0) -> InitialCondition:
    """Initial condition from (x, p0) samples, normalized to unit mass.

    The primitive is trapezoid quadrature of the samples; both callables
    interpolate linearly and vanish (density) / plateau at 1 (primitive)
    beyond the last sample.
    """
    x = np.asarray(x, dtype=float)
    p0 = np.asarray(p0, dtype=float)
    if x.ndim != 1 or x.size < 2 or x.shape != p0.shape:
        raise ValueError("need matching 1-d arrays with at least two samples")
    if x[0] != 0.0:
        raise ValueError("tabulated x values must start at 0")
    if np.any(np.diff(x) <= 0.0):
        raise ValueError("tabulated x values must be strictly increasing")
    if np.any(p0 < 0.0):
        raise ValueError("tabulated density must be nonnegative")
    cumulative = integrate.cumulative_trapezoid(p0, x, initial=0.0)
    total = cumulative[-1]
    if total <= 0.0:
        raise ValueError("tabulated density has no mass")
    p_norm = p0 / total
    cum_norm = cumulative / total

    def density(q):
        return np.interp(np.asarray(q, dtype=float), x, p_norm, left=0.0, right=0.0)

    def primitive(q):
        return np.interp(np.asarray(q, dtype=float), x, cum_norm, left=0.0, right=1.0)

    return InitialCondition(density, primitive, {"kind": "tabulated", "n_samples": int(x.size)})


@dataclass(frozen=True)
class SamplingConfig:
    """Node count and initial sampling rule.

    N        : node count (nodes k = 0..N)
    tail_tol : cutoff tolerance defining the initial domain [0, l0]
    strategy : "log_spaced" (x_max, x_first), "uniform", or "custom" (positions)
    """

    N: int
    tail_tol: float = 1e-5
    strategy: str = "log_spaced"
    x_max: float | None = None
    x_first: float | None = None
    positions: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.N < 3:
            raise ValueError("need N >= 3 nodes")
        if not 0.0 < self.tail_tol < 1.0:
            raise ValueError("tail_tol must lie strictly between 0 and 1")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown sampling strategy {self.strategy!r}")
        if self.x_first is not None and self.x_first <= 0.0:
            raise ValueError("x_first must be positive")
        if (self.strategy == "custom") != (self.positions is not None):
            raise ValueError("positions must be given exactly for the custom strategy")


@dataclass(frozen=True)
class MassGrid:
    """Frozen cumulative-probability nodes and derived spacings.

    P         : P_0 < P_1 < ... < P_N (immutable after construction)
    dP_half   : P_{k+1} - P_k, length N
    dP_center : node weights, length N+1; interior entries are the chosen
                mean of the adjacent gaps, dP_center[0] = dP_half[0]/2
                (half-cell; node 0 never moves) and dP_center[N] = dP_right
    dP_right  : (P_N - P_{N-2})/2, the zero-flux boundary weight
    mean_kind : "arithmetic" (default) or "geometric"
    """

    P: np.ndarray
    dP_half: np.ndarray
    dP_center: np.ndarray
    dP_right: float
    mean_kind: str

    def __post_init__(self) -> None:
        for name in ("P", "dP_half", "dP_center"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_nodes(self) -> int:
        return self.P.size


@dataclass(frozen=True)
class ParticleState:
    """Time t plus the node values Y_k; Y_0 = 0 and Y strictly increasing."""

    t: float
    Y: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.Y, dtype=float)
        if arr.ndim != 1 or arr.size < 3:
            raise ValueError("Y must be a 1-d array with at least three nodes")
        if arr[0] != 0.0:
            raise ValueError("Y[0] must be exactly 0")
        if np.any(np.diff(arr) <= 0.0):
            raise OrderingError("Y must be strictly increasing")
        arr.setflags(write=False)
        object.__setattr__(self, "Y", arr)

    @property
    def n_moving(self) -> int:
        return self.Y.size - 1


def choose_domain_l0(ic: InitialCondition, tail_tol: float) -> float:
    """Leftmost l0 with 1 - P0(l0) < tail_tol, bisected to relative width 1e-12."""
    if not 0.0 < tail_tol < 1.0:
        raise ValueError("tail_tol must lie strictly between 0 and 1")

    def satisfied(x: float) -> bool:
        return 1.0 - float(ic.primitive(x)) < tail_tol

    hi = 1.0
    for _ in range(200):
        if satisfied(hi):
            break
        if hi > 1e30:
            raise ValueError("primitive plateaus below 1 - tail_tol on the search bracket")
        hi *= 2.0
    else:
        raise ValueError("primitive plateaus below 1 - tail_tol on the search bracket")
    lo = 0.0
    while hi - lo > 1e-12 * hi:
        mid = 0.5 * (lo + hi)
        if satisfied(mid):
            hi = mid
        else:
            lo = mid
    return hi


def initial_positions(cfg: SamplingConfig, l0: float) -> np.ndarray:
    """Initial node positions x_0 = 0 < x_1 < ... < x_N per the sampling rule.

    log_spaced places x_1..x_N geometrically from x_first (default
    1e-3 * x_max) to x_max (default l0); uniform spans [0, l0] evenly.
    """
    if cfg.strategy == "uniform":
        return np.linspace(0.0, l0, cfg.N + 1)
    if cfg.strategy == "custom":
        pos = np.asarray(cfg.positions, dtype=float)
        if pos.size != cfg.N + 1:
            raise ValueError(f"custom positions must have N+1 = {cfg.N + 1} entries")
        if pos[0] != 0.0 or np.any(np.diff(pos) <= 0.0):
            raise ValueError("custom positions must start at 0 and increase strictly")
        return pos
    x_max = l0 if cfg.x_max is None else cfg.x_max
    x_first = 1e-3 * x_max if cfg.x_first is None else cfg.x_first
    if not 0.0 < x_first < x_max:
        raise ValueError("need 0 < x_first < x_max for log spacing")
    out = np.empty(cfg.N + 1)
    out[0] = 0.0
    out[1:] = np.geomspace(x_first, x_max, cfg.N)
    return out


def build_mass_grid(
    ic: InitialCondition, positions: np.ndarray, mean_kind: str = "arithmetic"
) -> tuple[MassGrid, ParticleState]:
    """Freeze P_k = P0(x_k) and seed the state with Y_k(0) = x_k.

    Raises ValueError when a mass gap degenerates (density vanishing between
    nodes); the caller must resample in that case.
    """
    if mean_kind not in MEAN_KINDS:
        raise ValueError(f"mean_kind must be one of {MEAN_KINDS}")
    positions = np.asarray(positions, dtype=float)
    if positions[0] != 0.0 or np.any(np.diff(positions) <= 0.0):
        raise ValueError("positions must start at 0 and increase strictly")
    P = np.asarray(ic.primitive(positions), dtype=float)
    dP_half = np.diff(P)
    if np.any(dP_half <= _DP_FLOOR):
        k = int(np.argmin(dP_half))
        raise ValueError(
            f"degenerate mass grid: gap {k} carries mass {dP_half[k]:.3e} "
            "(density vanishes between nodes); resample the initial positions"
        )
    n = positions.size - 1
    dP_center = np.empty(n + 1)
    dP_center[0] = 0.5 * dP_half[0]
    if mean_kind == "arithmetic":
        dP_center[1:n] = 0.5 * (dP_half[:-1] + dP_half[1:])
    else:
        dP_center[1:n] = np.sqrt(dP_half[:-1] * dP_half[1:])
    dP_right = 0.5 * (P[-1] - P[-3])
    dP_center[n] = dP_right
    grid = MassGrid(P=P, dP_half=dP_half, dP_center=dP_center, dP_right=dP_right, mean_kind=mean_kind)
    return grid, ParticleState(t=0.0, Y=positions)


def _rhs(t: float, Y: np.ndarray, grid: MassGrid, params: FellerParams) -> np.ndarray:
    """Semi-discrete dY/dt on a raw node array; raises OrderingError."""
    gaps = np.diff(Y)
    if np.any(gaps <= 0.0):
        raise OrderingError("node ordering violated in right-hand side")
    flux = grid.dP_half / gaps  # F_{k+1/2} = dP_{k+1/2} / (Y_{k+1} - Y_k)
    coef = params.eta * math.exp(params.gamma * t)
    dY = np.empty_like(Y)
    dY[0] = 0.0
    dY[1:-1] = -coef * (Y[1:-1] / grid.dP_center[1:-1]) * (flux[1:] - flux[:-1])
    # Zero-flux right boundary: one-sided difference of the same two faces;
    # dP_right is exactly the distance between their midpoints in P.  (The
    # single-face form sometimes quoted is not well-balanced: it moves steady
    # data at the last node at O(1) relative speed.)
    dY[-1] = -coef * (Y[-1] / grid.dP_right) * (flux[-1] - flux[-2])
    return dY


def lagrangian_rhs(state: ParticleState, grid: MassGrid, params: FellerParams) -> np.ndarray:
    """dY/dt of the mass-coordinate system at the state's time.

    Interior nodes follow the two-sided scheme, node 0 is pinned (dY_0 = 0),
    and the last node carries the one-sided zero-flux boundary difference.
    """
    return _rhs(state.t, state.Y, grid, params)


def total_probability(grid: MassGrid) -> float:
    """P_N - P_0; constant by construction since the mass grid is frozen."""
    return float(grid.P[-1] - grid.P[0])


def first_moment(state: ParticleState, grid: MassGrid, params: FellerParams) -> float:
    """Discrete first moment sum_k dP_center[k] * X_k with X = e^(-gamma t) Y.

    Along exact trajectories of the semi-discrete system this obeys
    M1' = eta * m - gamma * M1 with m the total probability (the node-0
    weight is irrelevant because X_0 = 0).
    """
    x = math.exp(-params.gamma * state.t) * state.Y
    return float(grid.dP_center @ x)


def moment_ode_solution(params: FellerParams, mass: float, m1_0: float, t):
    """Closed-form first moment M1(t) = eta m / gamma + (M1(0) - eta m / gamma) e^(-gamma t).

    Falls back to the gamma = 0 limit M1(0) + eta m t.
    """
    t_arr = np.asarray(t, dtype=float)
    if params.gamma == 0.0:
        out = m1_0 + params.eta * mass * t_arr
    else:
        limit = params.eta * mass / params.gamma
        out = limit + (m1_0 - limit) * np.exp(-params.gamma * t_arr)
    return float(out) if np.ndim(t) == 0 else out


def ic_first_moment(ic: InitialCondition, upper: float | None = None) -> float:
    """Quadrature of int x p0(x) dx, the moment-law seed M1(0)."""
    if upper is None:
        upper = np.inf
    value, _ = integrate.quad(lambda x: x * float(ic.density(x)), 0.0, upper, limit=200)
    return value
