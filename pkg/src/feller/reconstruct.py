"""Recover physical variables from the dynamic state and serialize snapshots.

X is recovered from Y by undoing the exponential rescaling; the density is
the forward-difference quotient of frozen mass gaps over moving node gaps,
attributed at the left node.  Snapshot CSV columns are t,k,P,X,Y,p with 17
significant digits (lossless for binary64); p is empty for the last node,
which has no forward gap.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .analytic import FellerParams
from .lagrange import (
    InitialCondition,
    MassGrid,
    ParticleState,
    first_moment,
    tabulated_ic,
    total_probability,
)

_FMT = "{:.17g}"


@dataclass(frozen=True)
class Snapshot:
    """Reconstructed physical sample at one instant.

    x    : node positions X_k (length N+1, x[0] = 0, strictly increasing)
    p    : cell densities dP_{k+1/2} / (X_{k+1} - X_k), attributed at x[k]
    P    : frozen mass-grid values (carried for serialization)
    y    : raw dynamic node values Y_k
    mass : total probability P_N - P_0
    m1   : discrete first moment
    """

    t: float
    x: np.ndarray
    p: np.ndarray
    mass: float
    m1: float
    P: np.ndarray
    y: np.ndarray

    def density_samples(self) -> tuple[np.ndarray, np.ndarray]:
        """(x, p) sample pairs for density comparisons.

        p[k] is the exact average of the density over [x_k, x_{k+1}] (the
        mass gap over the node gap), so it is attributed at the cell
        midpoint here, where it is second-order accurate.  The CSV layout
        keeps the forward-difference row association (p on node row k).
        """
        return 0.5 * (self.x[:-1] + self.x[1:]), self.p


def recover_x(state: ParticleState, params: FellerParams) -> np.ndarray:
    """X_k = e^(-gamma t) Y_k; X_0 = 0 and the ordering is inherited."""
    return math.exp(-params.gamma * state.t) * state.Y


def reconstruct_pdf(state: ParticleState, grid: MassGrid, params: FellerParams) -> Snapshot:
    """Forward-difference density reconstruction on the recovered positions."""
    x = recover_x(state, params)
    p = grid.dP_half / np.diff(x)
    return Snapshot(
        t=state.t,
        x=x,
        p=p,
        mass=total_probability(grid),
        m1=first_moment(state, grid, params),
        P=grid.P,
        y=state.Y,
    )


def write_snapshot_csv(snapshots: Sequence[Snapshot], destination) -> None:
    """Write snapshots as t,k,P,X,Y,p rows (LF endings, '.' decimal separator)."""
    with open(destination, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "k", "P", "X", "Y", "p"])
        for snap in snapshots:
            n = snap.x.size
            for k in range(n):
                p_field = _FMT.format(snap.p[k]) if k < n - 1 else ""
                writer.writerow(
                    [
                        _FMT.format(snap.t),
                        k,
                        _FMT.format(snap.P[k]),
                        _FMT.format(snap.x[k]),
                        _FMT.format(snap.y[k]),
                        p_field,
                    ]
                )


def _moment_weights(P: np.ndarray) -> np.ndarray:
    # Arithmetic-mean node weights with the half-cell left end and the
    # zero-flux right-end weight (P_N - P_{N-2})/2.
    w = np.empty_like(P)
    w[0] = 0.5 * (P[1] - P[0])
    w[1:-1] = 0.5 * (P[2:] - P[:-2])
    w[-1] = 0.5 * (P[-1] - P[-3])
    return w


def read_snapshot_csv(source) -> list[Snapshot]:
    """Parse a snapshot CSV back into Snapshot objects.

    The serialized values (t, P, X, Y, p) round-trip exactly; mass and the
    first moment are recomputed from the parsed columns.
    """
    name = str(source)
    blocks: list[dict] = []
    with open(source, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["t", "k", "P", "X", "Y", "p"]:
            raise ValueError(f"{name}: line 1: expected header t,k,P,X,Y,p")
        current: dict | None = None
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 6:
                raise ValueError(f"{name}: line {lineno}: expected 6 fields, got {len(row)}")
            try:
                t = float(row[0])
                k = int(row[1])
                values = [float(row[2]), float(row[3]), float(row[4])]
                p_val = float(row[5]) if row[5] != "" else None
            except ValueError as exc:
                raise ValueError(f"{name}: line {lineno}: {exc}") from None
            if k == 0:
                current = {"t": t, "P": [], "x": [], "y": [], "p": []}
                blocks.append(current)
            if current is None or k != len(current["x"]):
                raise ValueError(f"{name}: line {lineno}: node index {k} out of sequence")
            current["P"].append(values[0])
            current["x"].append(values[1])
            current["y"].append(values[2])
            if p_val is not None:
                current["p"].append(p_val)

    snapshots = []
    for block in blocks:
        P = np.array(block["P"])
        x = np.array(block["x"])
        y = np.array(block["y"])
        p = np.array(block["p"])
        if p.size != x.size - 1:
            raise ValueError(f"{name}: snapshot at t={block['t']} has a malformed density column")
        snapshots.append(
            Snapshot(
                t=block["t"],
                x=x,
                p=p,
                mass=float(P[-1] - P[0]),
                m1=float(_moment_weights(P) @ x),
                P=P,
                y=y,
            )
        )
    return snapshots


def read_tabulated_ic(source) -> InitialCondition:
    """Read an x,p0 table (strictly increasing x starting at 0) as an IC."""
    name = str(source)
    xs: list[float] = []
    ps: list[float] = []
    with open(source, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["x", "p0"]:
            raise ValueError(f"{name}: line 1: expected header x,p0")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ValueError(f"{name}: line {lineno}: expected 2 fields, got {len(row)}")
            try:
                xs.append(float(row[0]))
                ps.append(float(row[1]))
            except ValueError as exc:
                raise ValueError(f"{name}: line {lineno}: {exc}") from None
    if len(xs) < 2:
        raise ValueError(f"{name}: need at least two samples")
    try:
        return tabulated_ic(np.array(xs), np.array(ps))
    except ValueError as exc:
        raise ValueError(f"{name}: {exc}") from None
