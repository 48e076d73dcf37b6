"""Run configuration: strict JSON parsing and the built-in presets.

The config document mirrors RunConfig field names exactly; unknown keys are
errors at every nesting level (guards against silent typos).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analytic import FellerParams
from .lagrange import InitialCondition, SamplingConfig, double_exp_ic, steady_ic
from .reconstruct import read_tabulated_ic
from .timestepping import StepControl

PRESETS = ("steady", "expand", "confine")

_DIAG_FLAGS = ("residual", "conservation_law", "moment_track", "oracle_compare", "mc_compare")


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


@dataclass(frozen=True)
class RunConfig:
    """Everything one experiment needs: equation, horizon, grids, IC, output."""

    params: FellerParams
    T: float
    sampling: SamplingConfig
    step: StepControl
    ic: dict
    snapshot_times: tuple[float, ...]
    out_dir: str | None = None
    diagnostics: dict = field(
        default_factory=lambda: {name: name == "moment_track" for name in _DIAG_FLAGS}
    )

    def __post_init__(self) -> None:
        if not self.T > 0.0:
            raise ConfigError("T must be positive")
        times = tuple(float(v) for v in self.snapshot_times)
        if any(t < 0.0 or t > self.T for t in times):
            raise ConfigError("snapshot times must lie within [0, T]")
        if tuple(sorted(times)) != times:
            raise ConfigError("snapshot times must be sorted")
        object.__setattr__(self, "snapshot_times", times)


def _reject_unknown(d: dict, allowed: tuple[str, ...], context: str) -> None:
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {context}: {', '.join(unknown)}")


def _require(d: dict, key: str, context: str):
    if key not in d:
        raise ConfigError(f"missing required key {key!r} in {context}")
    return d[key]


def run_config_from_dict(doc: dict) -> RunConfig:
    """Validate a parsed config document; every key must be known."""
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    _reject_unknown(doc, ("params", "T", "sampling", "step", "ic", "output", "diagnostics"), "config")

    pd = _require(doc, "params", "config")
    _reject_unknown(pd, ("gamma", "eta"), "params")
    try:
        params = FellerParams(float(_require(pd, "gamma", "params")), float(_require(pd, "eta", "params")))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    t_final = float(_require(doc, "T", "config"))

    sd = _require(doc, "sampling", "config")
    _reject_unknown(sd, ("N", "tail_tol", "strategy", "x_max", "x_first", "positions"), "sampling")
    try:
        sampling = SamplingConfig(
            N=int(_require(sd, "N", "sampling")),
            tail_tol=float(sd.get("tail_tol", 1e-5)),
            strategy=str(sd.get("strategy", "log_spaced")),
            x_max=None if sd.get("x_max") is None else float(sd["x_max"]),
            x_first=None if sd.get("x_first") is None else float(sd["x_first"]),
            positions=None if sd.get("positions") is None else tuple(float(v) for v in sd["positions"]),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    st = doc.get("step", {})
    _reject_unknown(
        st,
        ("abstol", "reltol", "dt_init", "dt_min", "dt_max", "safety", "grow_max", "shrink_min"),
        "step",
    )
    try:
        step = StepControl(
            abstol=float(st.get("abstol", 1e-5)),
            reltol=float(st.get("reltol", 1e-5)),
            dt_init=None if st.get("dt_init") is None else float(st["dt_init"]),
            dt_min=None if st.get("dt_min") is None else float(st["dt_min"]),
            dt_max=None if st.get("dt_max") is None else float(st["dt_max"]),
            safety=float(st.get("safety", 0.9)),
            grow_max=float(st.get("grow_max", 5.0)),
            shrink_min=float(st.get("shrink_min", 0.2)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    icd = _require(doc, "ic", "config")
    kind = _require(icd, "kind", "ic")
    if kind == "steady":
        _reject_unknown(icd, ("kind", "c1", "c2"), "ic")
    elif kind == "double_exp":
        _reject_unknown(icd, ("kind", "sigma1", "sigma2", "x0"), "ic")
        for key in ("sigma1", "sigma2", "x0"):
            _require(icd, key, "ic")
    elif kind == "tabulated":
        _reject_unknown(icd, ("kind", "path"), "ic")
        _require(icd, "path", "ic")
    else:
        raise ConfigError(f"unknown ic kind {kind!r}; expected steady, double_exp or tabulated")

    out = doc.get("output", {})
    _reject_unknown(out, ("snapshot_times", "dir"), "output")
    if "snapshot_times" in out:
        snapshot_times = tuple(float(v) for v in out["snapshot_times"])
    else:
        snapshot_times = tuple(np.linspace(0.0, t_final, 11))
    out_dir = out.get("dir")

    dd = doc.get("diagnostics", {})
    _reject_unknown(dd, _DIAG_FLAGS, "diagnostics")
    diagnostics = {name: bool(dd.get(name, name == "moment_track")) for name in _DIAG_FLAGS}

    return RunConfig(
        params=params,
        T=t_final,
        sampling=sampling,
        step=step,
        ic=dict(icd),
        snapshot_times=snapshot_times,
        out_dir=out_dir,
        diagnostics=diagnostics,
    )


def load_run_config(path) -> RunConfig:
    """Read a JSON run configuration from disk."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    return run_config_from_dict(doc)


def make_initial_condition(config: RunConfig) -> InitialCondition:
    """Instantiate the configured initial density."""
    icd = config.ic
    kind = icd["kind"]
    if kind == "steady":
        return steady_ic(config.params, c1=float(icd.get("c1", 0.0)), c2=icd.get("c2"))
    if kind == "double_exp":
        return double_exp_ic(float(icd["sigma1"]), float(icd["sigma2"]), float(icd["x0"]))
    return read_tabulated_ic(Path(icd["path"]))


def preset_config(name: str) -> RunConfig:
    """The three reference experiments, parameter-for-parameter.

    steady : gamma=1, eta=1, C1=0, C2=1, T=10, N=500, tolerances 1e-5,
             uniform sampling of [0, l0]
    expand : gamma=-0.1, eta=1, T=3, N=100, two-scale exponential IC
             (sigma1=2, sigma2=1, x0=3), log sampling of [0, 20]
    confine: gamma=0.5, eta=1, T=12, otherwise as expand
    """
    if name == "steady":
        return RunConfig(
            params=FellerParams(gamma=1.0, eta=1.0),
            T=10.0,
            sampling=SamplingConfig(N=500, tail_tol=1e-5, strategy="uniform"),
            step=StepControl(abstol=1e-5, reltol=1e-5),
            ic={"kind": "steady", "c1": 0.0, "c2": 1.0},
            snapshot_times=tuple(np.linspace(0.0, 10.0, 11)),
        )
    if name == "expand":
        return RunConfig(
            params=FellerParams(gamma=-0.1, eta=1.0),
            T=3.0,
            sampling=SamplingConfig(N=100, tail_tol=1e-5, strategy="log_spaced", x_max=20.0),
            step=StepControl(abstol=1e-5, reltol=1e-5),
            ic={"kind": "double_exp", "sigma1": 2.0, "sigma2": 1.0, "x0": 3.0},
            snapshot_times=tuple(np.linspace(0.0, 3.0, 11)),
        )
    if name == "confine":
        return RunConfig(
            params=FellerParams(gamma=0.5, eta=1.0),
            T=12.0,
            sampling=SamplingConfig(N=100, tail_tol=1e-5, strategy="log_spaced", x_max=20.0),
            step=StepControl(abstol=1e-5, reltol=1e-5),
            ic={"kind": "double_exp", "sigma1": 2.0, "sigma2": 1.0, "x0": 3.0},
            snapshot_times=tuple(np.linspace(0.0, 12.0, 11)),
        )
    raise ConfigError(f"unknown preset {name!r}; expected one of {', '.join(PRESETS)}")
