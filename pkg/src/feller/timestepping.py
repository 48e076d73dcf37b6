"""Time marching for the mass-coordinate system.

A plain forward-Euler stepper (the presentation scheme) and an embedded
Dormand-Prince Runge-Kutta pair of orders 4 and 5 with FSAL (the production
scheme).  Both treat a node-ordering violation as a rejected step: the
right-hand side is singular at node collisions, so steps that break strict
monotonicity are discarded and retried smaller.

The adaptive loop is numba-compiled: near the origin the scheme carries a
local explicit-stability bound ~ e^(gamma t) dx^2/(2 eta x), so fine grids
take O(10^5..10^6) stability-limited steps and a pure-Python loop would not
meet the runtime budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .analytic import FellerParams
from .lagrange import MassGrid, OrderingError, ParticleState, _rhs

# Dormand-Prince 5(4) tableau; row 7 equals the 5th-order weights (FSAL).
_C = np.array([0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0])
_A = np.zeros((7, 7))
_A[1, :1] = (1.0 / 5.0,)
_A[2, :2] = (3.0 / 40.0, 9.0 / 40.0)
_A[3, :3] = (44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0)
_A[4, :4] = (19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0)
_A[5, :5] = (
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
)
_A[6, :6] = (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0)
# 5th-minus-4th order weights for the local error estimate.
_E = np.array(
    [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ]
)

_A.setflags(write=False)
_C.setflags(write=False)
_E.setflags(write=False)

_STATUS_OK = 0
_STATUS_DT_UNDERFLOW = 1


class IntegrationError(RuntimeError):
    """Step size fell below dt_min; carries the time reached."""

    def __init__(self, message: str, t_reached: float):
        super().__init__(message)
        self.t_reached = t_reached


@dataclass(frozen=True)
class StepControl:
    """Adaptive step control: tolerances, step clamps, controller constants.

    dt_init/dt_min/dt_max default to 1e-4, 1e-12 and 1.0 times the
    integration span when left as None.
    """

    abstol: float = 1e-5
    reltol: float = 1e-5
    dt_init: float | None = None
    dt_min: float | None = None
    dt_max: float | None = None
    safety: float = 0.9
    grow_max: float = 5.0
    shrink_min: float = 0.2

    def __post_init__(self) -> None:
        if not self.abstol > 0.0:
            raise ValueError("abstol must be positive")
        if not 0.0 < self.reltol < 1.0:
            raise ValueError("reltol must lie strictly between 0 and 1")
        if not 0.0 < self.safety <= 1.0:
            raise ValueError("safety must lie in (0, 1]")
        if not self.grow_max > 1.0 or not 0.0 < self.shrink_min < 1.0:
            raise ValueError("need grow_max > 1 and 0 < shrink_min < 1")
        for name in ("dt_init", "dt_min", "dt_max"):
            v = getattr(self, name)
            if v is not None and v <= 0.0:
                raise ValueError(f"{name} must be positive when given")

    def resolve_steps(self, span: float) -> tuple[float, float, float]:
        """(dt_init, dt_min, dt_max) with span-relative defaults filled in."""
        dt_init = 1e-4 * span if self.dt_init is None else self.dt_init
        dt_min = 1e-12 * span if self.dt_min is None else self.dt_min
        dt_max = span if self.dt_max is None else self.dt_max
        if not 0.0 < dt_min <= dt_init <= dt_max:
            raise ValueError("need 0 < dt_min <= dt_init <= dt_max")
        return dt_init, dt_min, dt_max


@dataclass
class TrajectoryRecord:
    """Outcome of an adaptive advance.

    snapshots holds the states at the requested output times (monotone);
    steps holds every accepted state when recording was requested.
    """

    accepted: int
    rejected: int
    snapshots: list[ParticleState]
    final: ParticleState
    steps: list[ParticleState] | None = None


def euler_step(
    state: ParticleState, grid: MassGrid, params: FellerParams, dt: float
) -> ParticleState:
    """One forward-Euler update of all nodes; t advances by dt.

    Raises OrderingError when the result is not strictly increasing; the
    caller halves dt and retries (see euler_advance).
    """
    if dt < 0.0:
        raise ValueError("dt must be nonnegative")
    dY = _rhs(state.t, state.Y, grid, params)
    return ParticleState(t=state.t + dt, Y=state.Y + dt * dY)


def euler_advance(
    state: ParticleState,
    grid: MassGrid,
    params: FellerParams,
    t_end: float,
    dt: float,
    dt_min: float | None = None,
) -> ParticleState:
    """Fixed-step Euler driver; halves dt on ordering violations."""
    if t_end < state.t:
        raise ValueError("t_end must not precede the state time")
    if dt_min is None:
        dt_min = 1e-12 * max(t_end - state.t, dt)
    step = dt
    while True:
        remaining = t_end - state.t
        if remaining <= 0.0:
            break
        try:
            state = euler_step(state, grid, params, min(step, remaining))
        except OrderingError:
            step *= 0.5
            if step < dt_min:
                raise IntegrationError(
                    f"Euler step fell below dt_min={dt_min:g} at t={state.t:g}", state.t
                ) from None
    return state


@numba.njit(cache=True)
def _rhs_nb(t, Y, dP_half, dP_center, dP_right, gamma, eta, out):  # pragma: no cover
    # Mirrors lagrange._rhs on raw arrays; returns False on an ordering
    # violation instead of raising.
    n = Y.shape[0]
    coef = eta * math.exp(gamma * t)
    out[0] = 0.0
    gap = Y[1] - Y[0]
    if gap <= 0.0:
        return False
    f_prev = dP_half[0] / gap
    f_prev2 = f_prev
    for k in range(1, n - 1):
        gap = Y[k + 1] - Y[k]
        if gap <= 0.0:
            return False
        f = dP_half[k] / gap
        out[k] = -coef * (Y[k] / dP_center[k]) * (f - f_prev)
        f_prev2 = f_prev
        f_prev = f
    out[n - 1] = -coef * (Y[n - 1] / dP_right) * (f_prev - f_prev2)
    return True


@numba.njit(cache=True)
def _advance_core(
    y,
    t0,
    t_end,
    dP_half,
    dP_center,
    dP_right,
    gamma,
    eta,
    abstol,
    reltol,
    dt0,
    dt_min,
    dt_max,
    safety,
    grow_max,
    shrink_min,
    outputs,
    snaps,
    record_steps,
):  # pragma: no cover
    n = y.shape[0]
    k = np.empty((7, n))
    ytmp = np.empty(n)
    ynew = np.empty(n)

    cap = 1024
    steps_t = np.empty(cap)
    steps_y = np.empty((cap, n))
    n_steps = 0

    accepted = 0
    rejected = 0
    out_idx = 0
    t = t0
    dt = dt0

    if not _rhs_nb(t, y, dP_half, dP_center, dP_right, gamma, eta, k[0]):
        return _STATUS_DT_UNDERFLOW, t, accepted, rejected, steps_t[:0], steps_y[:0]

    while t < t_end:
        next_stop = outputs[out_idx] if out_idx < outputs.shape[0] else t_end
        dt_step = dt if dt <= next_stop - t else next_stop - t
        truncated = dt_step < dt

        failed = False
        for i in range(1, 7):
            for j in range(n):
                acc = 0.0
                for m in range(i):
                    a = _A[i, m]
                    if a != 0.0:
                        acc += a * k[m, j]
                ytmp[j] = y[j] + dt_step * acc
            if not _rhs_nb(
                t + _C[i] * dt_step, ytmp, dP_half, dP_center, dP_right, gamma, eta, k[i]
            ):
                failed = True
                break
        if failed:
            rejected += 1
            dt = dt_step * shrink_min
            if dt < dt_min:
                return _STATUS_DT_UNDERFLOW, t, accepted, rejected, steps_t[:n_steps], steps_y[:n_steps]
            continue

        # Stage-7 argument is the 5th-order result (FSAL row).
        for j in range(n):
            ynew[j] = ytmp[j]
        err = 0.0
        for j in range(n):
            e = 0.0
            for m in range(7):
                w = _E[m]
                if w != 0.0:
                    e += w * k[m, j]
            e *= dt_step
            ya = abs(y[j])
            yb = abs(ynew[j])
            scale = abstol + reltol * (ya if ya > yb else yb)
            q = abs(e) / scale
            if q > err:
                err = q

        if err <= 1.0:
            t = next_stop if dt_step == next_stop - t else t + dt_step
            for j in range(n):
                y[j] = ynew[j]
                k[0, j] = k[6, j]
            accepted += 1
            if record_steps:
                if n_steps == cap:
                    cap *= 2
                    new_t = np.empty(cap)
                    new_y = np.empty((cap, n))
                    new_t[:n_steps] = steps_t[:n_steps]
                    new_y[:n_steps] = steps_y[:n_steps]
                    steps_t = new_t
                    steps_y = new_y
                steps_t[n_steps] = t
                steps_y[n_steps] = y
                n_steps += 1
            while out_idx < outputs.shape[0] and outputs[out_idx] <= t:
                snaps[out_idx] = y
                out_idx += 1
            factor = grow_max if err == 0.0 else safety * err**-0.2
            if factor < shrink_min:
                factor = shrink_min
            elif factor > grow_max:
                factor = grow_max
            proposal = dt_step * factor
            # A truncated landing step must not shrink the controller memory.
            if truncated and proposal < dt:
                proposal = dt
            dt = proposal if proposal < dt_max else dt_max
        else:
            rejected += 1
            factor = safety * err**-0.2
            if factor < shrink_min:
                factor = shrink_min
            elif factor > 1.0:
                factor = 1.0
            dt = dt_step * factor
            if dt < dt_min:
                return _STATUS_DT_UNDERFLOW, t, accepted, rejected, steps_t[:n_steps], steps_y[:n_steps]

    return _STATUS_OK, t, accepted, rejected, steps_t[:n_steps], steps_y[:n_steps]


def rk45_advance(
    state: ParticleState,
    grid: MassGrid,
    params: FellerParams,
    t_end: float,
    ctrl: StepControl,
    output_times=(),
    record_steps: bool = False,
) -> TrajectoryRecord:
    """Advance with the embedded Dormand-Prince 5(4) pair (7 stages, FSAL).

    The per-step error is the weighted max norm
    max_k |e_k| / (abstol + reltol * max(|Y_k|, |Y_k^new|)); a step is
    accepted when it is <= 1 and the next step is
    dt * clamp(safety * err^(-1/5), shrink_min, grow_max).  Any stage that
    violates strict node ordering forces a rejection with the aggressive
    shrink factor (the right-hand side is singular at node collision).
    Requested output times are landed on exactly by step truncation.
    Raises IntegrationError (reporting the time reached) if the step size
    falls below dt_min.
    """
    if t_end < state.t:
        raise ValueError("t_end must not precede the state time")
    outputs = sorted({float(v) for v in output_times})
    if outputs and (outputs[0] < state.t or outputs[-1] > t_end):
        raise ValueError("output times must lie within [state.t, t_end]")

    snapshots: list[ParticleState] = []
    steps: list[ParticleState] | None = [state] if record_steps else None
    pending = [v for v in outputs if v <= state.t]
    snapshots.extend([state] * len(pending))
    future = np.array([v for v in outputs if v > state.t])
    if t_end == state.t:
        return TrajectoryRecord(0, 0, snapshots, state, steps)

    dt0, dt_min, dt_max = ctrl.resolve_steps(t_end - state.t)
    y = np.array(state.Y, dtype=float)
    snap_buf = np.empty((future.size, y.size))
    status, t_reached, accepted, rejected, steps_t, steps_y = _advance_core(
        y,
        float(state.t),
        float(t_end),
        grid.dP_half,
        grid.dP_center,
        float(grid.dP_right),
        float(params.gamma),
        float(params.eta),
        float(ctrl.abstol),
        float(ctrl.reltol),
        float(dt0),
        float(dt_min),
        float(dt_max),
        float(ctrl.safety),
        float(ctrl.grow_max),
        float(ctrl.shrink_min),
        future,
        snap_buf,
        bool(record_steps),
    )
    if steps is not None:
        steps.extend(
            ParticleState(t=float(ts), Y=row) for ts, row in zip(steps_t, steps_y)
        )
    if status == _STATUS_DT_UNDERFLOW:
        raise IntegrationError(
            f"step size fell below dt_min={dt_min:g} at t={t_reached:g} "
            f"(reached {t_reached:g} of {t_end:g})",
            t_reached,
        )
    n_emitted = int(np.searchsorted(future, t_reached, side="right"))
    snapshots.extend(
        ParticleState(t=float(tv), Y=snap_buf[i]) for i, tv in enumerate(future[:n_emitted])
    )
    final = ParticleState(t=float(t_reached), Y=y)
    return TrajectoryRecord(accepted, rejected, snapshots, final, steps)


def cfl_reference_dt(state: ParticleState, params: FellerParams) -> float:
    """Eulerian explicit-scheme reference bound dx_min^2 / (2 eta X_N).

    Diagnostic only: it shows what a naive explicit Eulerian discretization
    of the current node layout would require; the Lagrangian stepper is not
    controlled by it.
    """
    x = math.exp(-params.gamma * state.t) * state.Y
    dx_min = float(np.min(np.diff(x)))
    return dx_min**2 / (2.0 * params.eta * float(x[-1]))
