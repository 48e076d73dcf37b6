"""Command line: reproduce the reference experiments and run diagnostics.

`feller run` executes one experiment (pseudo-inverse of the initial data,
adaptive mass-coordinate evolution, reconstruction) and writes snapshot CSV,
a run summary, optional node-trajectory CSV, and report figures.
`feller diag` drives the validation checks (exact-solution residuals, point
symmetries, the conservation-law diagnostic, Eulerian and Monte Carlo
cross-comparisons) and exits nonzero on any threshold breach.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from .analytic import (
    FellerParams,
    SteadyStateParams,
    SymmetryTransform,
    conservation_law_check,
    pde_residual,
    steady_state_p,
    transform_solution,
    xi3_solution,
    xi4_solution,
)
from .config import (
    PRESETS,
    ConfigError,
    RunConfig,
    load_run_config,
    make_initial_condition,
    preset_config,
)
from .lagrange import (
    build_mass_grid,
    choose_domain_l0,
    first_moment,
    ic_first_moment,
    initial_positions,
    moment_ode_solution,
    total_probability,
)
from .oracles import (
    EulerianConfig,
    MCConfig,
    TruncationError,
    compare_pdf,
    eulerian_solve,
    mc_simulate,
)
from .reconstruct import reconstruct_pdf, recover_x, write_snapshot_csv
from .timestepping import IntegrationError, cfl_reference_dt, rk45_advance
from . import figures

EXIT_OK = 0
EXIT_THRESHOLD = 1
EXIT_CONFIG = 2
EXIT_INTEGRATION = 3
EXIT_IO = 4

DEFAULT_MC_SEED = 20260810

_FMT = "{:.17g}"

DIAG_CHECKS = ("residual", "symmetry", "conservation", "oracle", "mc")

RESIDUAL_FAMILIES = ("steady_c1_0", "steady_general", "xi3", "xi4")
SYMMETRY_KINDS_CLI = ("time_shift", "scale_p", "exp_scale_3", "exp_scale_4", "add_kummer_m")

# Shared evaluation window for the exact-solution checks.
_T_PTS = np.linspace(0.2, 1.0, 9)
_X_PTS = np.linspace(0.5, 5.0, 25)
_H_LEVELS = (0.08, 0.04, 0.02)
_ORDER_TOL = 0.3
_SYMMETRY_RATIO_MAX = 10.0
_ORACLE_LINF_MAX = 0.01
_ORACLE_L1_MAX = 0.02
_MC_L1_MAX = 0.05


def resolve_out_dir(arg: str | None, config_dir: str | None = None) -> Path:
    """--out beats the config's output.dir beats $FELLER_OUT beats ./out."""
    choice = arg or config_dir or os.environ.get("FELLER_OUT") or "out"
    return Path(choice)


def _residual_family(name: str):
    if name == "steady_c1_0":
        params = FellerParams(1.0, 1.0)
        ss = SteadyStateParams(0.0, 1.0)
        return params, lambda t, x: steady_state_p(params, ss, x)
    if name == "steady_general":
        params = FellerParams(-0.5, 1.0)
        ss = SteadyStateParams(1.0, 0.5)
        return params, lambda t, x: steady_state_p(params, ss, x)
    if name == "xi3":
        params = FellerParams(1.0, 1.0)
        ss = SteadyStateParams(1.0, 2.0)
        return params, lambda t, x: xi3_solution(params, ss, t, x)
    if name == "xi4":
        params = FellerParams(1.0, 1.0)
        ss = SteadyStateParams(1.0, 0.5)
        return params, lambda t, x: xi4_solution(params, ss, t, x)
    raise ConfigError(f"unknown family {name!r}; expected one of {', '.join(RESIDUAL_FAMILIES)}")


def run_experiment(
    config: RunConfig,
    out_dir: Path,
    trajectories: bool = False,
    plot: bool = True,
    mean_kind: str = "arithmetic",
    mc_seed: int = DEFAULT_MC_SEED,
) -> dict:
    """Execute one experiment and write its artifacts; returns the summary."""
    out_dir.mkdir(parents=True, exist_ok=True)
    ic = make_initial_condition(config)
    l0 = choose_domain_l0(ic, config.sampling.tail_tol)
    positions = initial_positions(config.sampling, l0)
    grid, state0 = build_mass_grid(ic, positions, mean_kind)

    requested = tuple(config.snapshot_times)
    output_times = set(requested)
    if plot:
        output_times.update(np.linspace(0.0, config.T, 201))
    record = rk45_advance(
        state0,
        grid,
        config.params,
        config.T,
        config.step,
        output_times=sorted(output_times),
        record_steps=trajectories,
    )
    all_snaps = [reconstruct_pdf(s, grid, config.params) for s in record.snapshots]
    requested_set = set(requested)
    csv_snaps = [s for s in all_snaps if s.t in requested_set]

    snapshot_path = out_dir / "snapshots.csv"
    write_snapshot_csv(csv_snaps, snapshot_path)

    mass = total_probability(grid)
    m1_quad = ic_first_moment(ic)
    comments: list[str] = [
        f"accepted={record.accepted}",
        f"rejected={record.rejected}",
        f"l0={_FMT.format(l0)}",
        f"mean_kind={mean_kind}",
        f"cfl_reference_dt={_FMT.format(cfl_reference_dt(record.final, config.params))}",
    ]

    moment_dev = 0.0
    rows = []
    for snap in csv_snaps:
        m1_pred = moment_ode_solution(config.params, mass, m1_quad, snap.t)
        rows.append((snap.t, snap.mass, snap.m1, m1_pred))
        if m1_pred != 0.0:
            moment_dev = max(moment_dev, abs(snap.m1 - m1_pred) / abs(m1_pred))
    if config.diagnostics.get("moment_track", True):
        comments.append(f"max_moment_rel_dev={_FMT.format(moment_dev)}")

    if config.diagnostics.get("conservation_law") and config.params.gamma != 0.0:
        samples = [(s.t, *s.density_samples()) for s in csv_snaps]
        hi = min(float(s.x[-1]) for s in csv_snaps)
        a, b = 1.0, min(10.0, 0.9 * hi)
        defect = conservation_law_check(samples, config.params, a, b)
        comments.append(f"conservation_defect={_FMT.format(defect)} on [{a:g},{b:g}]")

    if config.diagnostics.get("oracle_compare"):
        linf, l1 = _eulerian_comparison(config, ic, all_snaps[-1])
        comments.append(f"eulerian_linf={_FMT.format(linf)}")
        comments.append(f"eulerian_l1={_FMT.format(l1)}")

    if config.diagnostics.get("mc_compare"):
        l1 = _mc_comparison(config, ic, all_snaps[-1], paths=10**5, seed=mc_seed)
        comments.append(f"mc_l1={_FMT.format(l1)}")

    summary_path = out_dir / "summary.csv"
    with open(summary_path, "w", newline="") as fh:
        fh.write("t,mass,m1,m1_ode\n")
        for t, ms, m1, m1p in rows:
            fh.write(",".join(_FMT.format(v) for v in (t, ms, m1, m1p)) + "\n")
        for line in comments:
            fh.write(f"# {line}\n")

    written = [snapshot_path, summary_path]

    if trajectories:
        traj_path = out_dir / "trajectories.csv"
        with open(traj_path, "w", newline="") as fh:
            fh.write("t,k,X\n")
            for st in record.steps:
                x = recover_x(st, config.params)
                for k, xv in enumerate(x):
                    fh.write(f"{_FMT.format(st.t)},{k},{_FMT.format(xv)}\n")
        written.append(traj_path)

    if plot:
        written.extend(figures.render_density_figures(csv_snaps, out_dir))
        times = [s.t for s in all_snaps]
        pos = np.vstack([s.x for s in all_snaps])
        written.append(figures.render_trajectory_figure(times, pos, out_dir))

    return {
        "out_dir": out_dir,
        "written": written,
        "accepted": record.accepted,
        "rejected": record.rejected,
        "mass": mass,
        "final": all_snaps[-1],
        "initial": all_snaps[0],
        "moment_rel_dev": moment_dev,
        "l0": l0,
    }


def _run_preset_snapshots(name: str, n_times: int | None = None, n_override: int | None = None):
    config = preset_config(name)
    if n_override is not None:
        sampling = config.sampling
        config = RunConfig(
            params=config.params,
            T=config.T,
            sampling=type(sampling)(
                N=n_override,
                tail_tol=sampling.tail_tol,
                strategy=sampling.strategy,
                x_max=sampling.x_max,
                x_first=sampling.x_first,
                positions=sampling.positions,
            ),
            step=config.step,
            ic=config.ic,
            snapshot_times=config.snapshot_times,
        )
    ic = make_initial_condition(config)
    l0 = choose_domain_l0(ic, config.sampling.tail_tol)
    grid, state0 = build_mass_grid(ic, initial_positions(config.sampling, l0))
    times = config.snapshot_times if n_times is None else tuple(np.linspace(0.0, config.T, n_times))
    record = rk45_advance(
        state0, grid, config.params, config.T, config.step, output_times=times
    )
    snaps = [reconstruct_pdf(s, grid, config.params) for s in record.snapshots]
    return config, ic, grid, record, snaps


def _eulerian_comparison(config: RunConfig, ic, final_snap, L=None, M=4000, dt=1e-3):
    xs, ps = final_snap.density_samples()
    if L is None:
        L = float(math.ceil(1.3 * final_snap.x[-1]))
    cfg = EulerianConfig(L=L, M=M, dt=dt)
    result = eulerian_solve(cfg, config.params, ic, config.T)
    ref = result.samples[-1]
    dx = cfg.L / cfg.M
    keep = xs >= 5.0 * dx
    linf = compare_pdf((xs[keep], ps[keep]), (ref.x, ref.p), "linf")
    l1 = compare_pdf((xs[keep], ps[keep]), (ref.x, ref.p), "l1")
    return linf, l1


def _mc_comparison(config: RunConfig, ic, final_snap, paths: int, seed: int):
    hist = mc_simulate(MCConfig(paths=paths, dt=1e-3, seed=seed, x_init=ic), config.params, config.T)
    centers, density = hist.density_samples()
    width = hist.edges[1] - hist.edges[0]
    keep = centers >= 5.0 * width
    xs, ps = final_snap.density_samples()
    return compare_pdf((xs, ps), (centers[keep], density[keep]), "l1")


def _write_rows(path: Path, header: str, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")


def run_diagnostics(
    check: str,
    out_dir: Path,
    preset: str | None = None,
    family: str | None = None,
    kind: str | None = None,
    seed: int = DEFAULT_MC_SEED,
    paths: int = 10**6,
    plot: bool = True,
) -> bool:
    """Run one validation check; writes diag_<check>.csv, returns pass/fail."""
    out_dir.mkdir(parents=True, exist_ok=True)
    ok = True
    rows: list[tuple] = []

    if check == "residual":
        names = (family,) if family else RESIDUAL_FAMILIES
        fig_rows = []
        for name in names:
            params, solution = _residual_family(name)
            norms = [
                pde_residual(solution, params, _T_PTS, _X_PTS, h, h).max_norm for h in _H_LEVELS
            ]
            order = float(np.polyfit(np.log(_H_LEVELS), np.log(norms), 1)[0])
            passed = abs(order - 2.0) <= _ORDER_TOL
            ok &= passed
            for h, r in zip(_H_LEVELS, norms):
                rows.append((name, h, _FMT.format(r), _FMT.format(order), passed))
                fig_rows.append((name, h, r))
            print(f"residual {name}: order={order:.3f} (gate 2.0 +/- {_ORDER_TOL}) "
                  f"{'ok' if passed else 'BREACH'}")
        _write_rows(out_dir / "diag_residual.csv", "family,h,max_residual,order,ok", rows)
        if plot:
            figures.render_convergence_figure(fig_rows, out_dir)

    elif check == "symmetry":
        params = FellerParams(-0.5, 1.0)
        ss = SteadyStateParams(1.0, 0.5)
        base = lambda t, x: steady_state_p(params, ss, x)  # noqa: E731
        h = _H_LEVELS[-1]
        baseline = pde_residual(base, params, _T_PTS, _X_PTS, h, h).max_norm
        kinds = (kind,) if kind else SYMMETRY_KINDS_CLI
        for name in kinds:
            if name not in SYMMETRY_KINDS_CLI:
                raise ConfigError(f"unknown symmetry kind {name!r}")
            c_values = (0.0, params.gamma / 2.0) if name == "add_kummer_m" else (0.0,)
            for c in c_values:
                for eps in (0.1, -0.1):
                    tr = SymmetryTransform(name, eps, c=c)
                    r = pde_residual(
                        transform_solution(tr, params, base), params, _T_PTS, _X_PTS, h, h
                    ).max_norm
                    ratio = r / baseline
                    passed = ratio <= _SYMMETRY_RATIO_MAX
                    ok &= passed
                    rows.append((name, eps, c, _FMT.format(r), _FMT.format(ratio), passed))
                    print(f"symmetry {name} eps={eps:+.1f} c={c:g}: ratio={ratio:.3f} "
                          f"(gate {_SYMMETRY_RATIO_MAX:g}) {'ok' if passed else 'BREACH'}")
        _write_rows(
            out_dir / "diag_symmetry.csv", "kind,epsilon,c,max_residual,ratio,ok", rows
        )

    elif check == "conservation":
        name = preset or "expand"
        defects = {}
        for label, n, snaps_n in (("base", 100, 33), ("grid_refined", 200, 33), ("time_refined", 100, 65)):
            config, ic, grid, record, snaps = _run_preset_snapshots(name, n_times=snaps_n, n_override=n)
            samples = [(s.t, *s.density_samples()) for s in snaps]
            defects[label] = conservation_law_check(samples, config.params, 1.0, 10.0)
            rows.append((label, n, snaps_n, _FMT.format(defects[label])))
        ok = defects["grid_refined"] < defects["base"] and defects["time_refined"] < defects["base"]
        for label, n, snaps_n, d in rows:
            print(f"conservation {label}: N={n} snapshots={snaps_n} defect={float(d):.4e}")
        print(f"conservation refinement decreasing: {'ok' if ok else 'BREACH'}")
        _write_rows(out_dir / "diag_conservation.csv", "case,N,snapshots,defect", rows)

    elif check == "oracle":
        name = preset or "expand"
        config, ic, grid, record, snaps = _run_preset_snapshots(name)
        linf, l1 = _eulerian_comparison(config, ic, snaps[-1], L=100.0, M=4000, dt=1e-3)
        ok = linf <= _ORACLE_LINF_MAX and l1 <= _ORACLE_L1_MAX
        rows = [("linf", _FMT.format(linf), _ORACLE_LINF_MAX, linf <= _ORACLE_LINF_MAX),
                ("l1", _FMT.format(l1), _ORACLE_L1_MAX, l1 <= _ORACLE_L1_MAX)]
        print(f"oracle {name}: Linf={linf:.4f} (gate {_ORACLE_LINF_MAX}) "
              f"L1={l1:.4f} (gate {_ORACLE_L1_MAX}) {'ok' if ok else 'BREACH'}")
        _write_rows(out_dir / "diag_oracle.csv", "metric,value,threshold,ok", rows)
        if plot:
            result = eulerian_solve(
                EulerianConfig(L=100.0, M=4000, dt=1e-3), config.params, ic, config.T
            )
            figures.render_overlay_figure(
                [snaps[-1].density_samples(), (result.samples[-1].x, result.samples[-1].p)],
                ["mass-coordinate", "eulerian"],
                out_dir,
                "oracle_overlay",
            )

    elif check == "mc":
        name = preset or "expand"
        config, ic, grid, record, snaps = _run_preset_snapshots(name)
        l1 = _mc_comparison(config, ic, snaps[-1], paths=paths, seed=seed)
        ok = l1 <= _MC_L1_MAX
        rows = [("l1", _FMT.format(l1), _MC_L1_MAX, ok)]
        print(f"mc {name}: paths={paths} seed={seed} L1={l1:.4f} (gate {_MC_L1_MAX}) "
              f"{'ok' if ok else 'BREACH'}")
        _write_rows(out_dir / "diag_mc.csv", "metric,value,threshold,ok", rows)
        if plot:
            hist = mc_simulate(
                MCConfig(paths=paths, dt=1e-3, seed=seed, x_init=ic), config.params, config.T
            )
            figures.render_overlay_figure(
                [snaps[-1].density_samples(), hist.density_samples()],
                ["mass-coordinate", "monte carlo"],
                out_dir,
                "mc_overlay",
            )

    else:
        raise ConfigError(f"unknown check {check!r}; expected one of {', '.join(DIAG_CHECKS)}")

    return ok


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="feller",
        description="Mass-coordinate solver for the half-line drift-diffusion equation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment from a preset or config file")
    src = run_p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", type=Path, help="JSON run configuration")
    src.add_argument("--preset", choices=PRESETS, help="built-in experiment")
    run_p.add_argument("--out", help="output directory (default: $FELLER_OUT or ./out)")
    run_p.add_argument("--trajectories", action="store_true",
                       help="write t,k,X rows for every accepted step (large)")
    run_p.add_argument("--mean", choices=("arithmetic", "geometric"), default="arithmetic",
                       help="node-weight mean of adjacent mass gaps")
    run_p.add_argument("--seed", type=int, default=DEFAULT_MC_SEED,
                       help="Monte Carlo seed for the mc_compare diagnostic")
    run_p.add_argument("--no-plot", action="store_true", help="skip figure rendering")

    diag_p = sub.add_parser("diag", help="run a validation check")
    diag_p.add_argument("--check", required=True, choices=DIAG_CHECKS)
    diag_p.add_argument("--preset", choices=PRESETS,
                        help="preset the check runs on (conservation/oracle/mc)")
    diag_p.add_argument("--family", choices=RESIDUAL_FAMILIES,
                        help="restrict the residual check to one family")
    diag_p.add_argument("--kind", choices=SYMMETRY_KINDS_CLI,
                        help="restrict the symmetry check to one transformation")
    diag_p.add_argument("--out", help="output directory (default: $FELLER_OUT or ./out)")
    diag_p.add_argument("--seed", type=int, default=DEFAULT_MC_SEED, help="Monte Carlo seed")
    diag_p.add_argument("--paths", type=int, default=10**6, help="Monte Carlo path count")
    diag_p.add_argument("--no-plot", action="store_true", help="skip figure rendering")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            config = load_run_config(args.config) if args.config else preset_config(args.preset)
            out_dir = resolve_out_dir(args.out, config.out_dir)
            summary = run_experiment(
                config,
                out_dir,
                trajectories=args.trajectories,
                plot=not args.no_plot,
                mean_kind=args.mean,
                mc_seed=args.seed,
            )
            print(f"run complete: {summary['accepted']} accepted / {summary['rejected']} "
                  f"rejected steps; mass={summary['mass']:.12g}")
            for path in summary["written"]:
                print(f"wrote {path}")
            return EXIT_OK
        ok = run_diagnostics(
            args.check,
            resolve_out_dir(args.out),
            preset=args.preset,
            family=args.family,
            kind=args.kind,
            seed=args.seed,
            paths=args.paths,
            plot=not args.no_plot,
        )
        return EXIT_OK if ok else EXIT_THRESHOLD
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, TruncationError) as exc:
        print(f"integration failure: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
