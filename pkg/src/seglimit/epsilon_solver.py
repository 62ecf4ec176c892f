"""Constructive fixed-point iteration for the coupled system at fixed
epsilon.

Starting from the harmonic extensions of the boundary data, each sweep
solves one screened linear problem per component in ascending order (the
triangular structure of the decoupled scheme): component i sees the fresh
iterates of components j < i and the lagged ones of j > i, averaged into
the screening coefficient.  Even iterates decrease and odd iterates
increase, sandwiching the unique solution; convergence is measured by the
even/odd gap and the returned solution is the midpoint of the bracket.

For general exponents alpha_i >= 1 each inactive factor enters lagged as
u_j ** alpha_j and the active component is linearized semi-implicitly as
u_i_new * u_i_old ** (alpha_i - 1), keeping every sub-problem linear with
a nonnegative coefficient.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .elliptic_core import (
    DEFAULT_TOL,
    LinearSolveStats,
    ScalarField,
    apply_laplacian,
    solve_harmonic,
    solve_screened,
)
from .errors import SolverError
from .geometry import Grid
from .problem_data import ProblemData

DEFAULT_TOL_FP = 1e-8
DEFAULT_MAX_SWEEPS = 500


@dataclass
class IterationState:
    k: int
    fields: tuple[ScalarField, ...]
    prev: tuple[ScalarField, ...] | None
    gap: float
    linear_stats: list[LinearSolveStats] = field(default_factory=list)


@dataclass
class SolveResult:
    fields: tuple[ScalarField, ...]
    epsilon: float
    sweeps: int
    gap: float
    gap_history: list[float]
    linear_stats: list[LinearSolveStats]
    wall_time: float
    even: tuple[ScalarField, ...]
    odd: tuple[ScalarField, ...]

    @property
    def m(self) -> int:
        return len(self.fields)


def _sup_gap(a: tuple[ScalarField, ...], b: tuple[ScalarField, ...]) -> float:
    return max(float(np.abs(ai.values - bi.values).max()) for ai, bi in zip(a, b))


def initialize(g: Grid, data: ProblemData, tol_linear: float = DEFAULT_TOL) -> IterationState:
    """U^0: the harmonic extensions of the boundary data."""
    fields = []
    stats = []
    for arr in data.boundary_arrays(g):
        f, s = solve_harmonic(g, arr, tol_linear)
        fields.append(f)
        stats.append(s)
    return IterationState(0, tuple(fields), None, float("inf"), stats)


def sweep(
    s: IterationState,
    epsilon: float,
    data: ProblemData,
    tol_linear: float = DEFAULT_TOL,
    boundary_arrays: list[np.ndarray] | None = None,
) -> IterationState:
    """One decoupled sweep U^k -> U^{k+1}, components in ascending order."""
    g = s.fields[0].grid
    if boundary_arrays is None:
        boundary_arrays = data.boundary_arrays(g)
    A = data.weights.as_arrays(g)
    alphas = data.exponents.alphas
    m = data.m

    old = [f.values for f in s.fields]
    old_pow = [np.power(old[j], alphas[j]) if alphas[j] != 1 else old[j] for j in range(m)]
    # suffix products of lagged powered factors: suf[i] = prod_{j > i} old_pow[j]
    suf = [None] * m
    acc = np.ones_like(old[0])
    for j in range(m - 1, -1, -1):
        suf[j] = acc
        acc = acc * old_pow[j]

    new_fields: list[ScalarField] = []
    stats: list[LinearSolveStats] = []
    pre_old = np.ones_like(old[0])  # prod_{j<i} old_pow[j]
    pre_new = np.ones_like(old[0])  # prod_{j<i} new_pow[j]
    for i in range(m):
        active = old[i] ** (alphas[i] - 1) if alphas[i] != 1 else 1.0
        c = (A[i] / (2.0 * epsilon)) * (pre_old + pre_new) * suf[i] * active
        f, st = solve_screened(g, c, boundary_arrays[i], tol_linear)
        new_fields.append(f)
        stats.append(st)
        pre_old = pre_old * old_pow[i]
        nv = f.values
        pre_new = pre_new * (np.power(nv, alphas[i]) if alphas[i] != 1 else nv)

    new = tuple(new_fields)
    return IterationState(s.k + 1, new, s.fields, _sup_gap(new, s.fields), stats)


def solve_epsilon(
    g: Grid,
    data: ProblemData,
    epsilon: float,
    tol_fp: float = DEFAULT_TOL_FP,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    tol_linear: float = DEFAULT_TOL,
    initial: tuple[ScalarField, ...] | None = None,
) -> SolveResult:
    """Iterate sweeps until the even/odd sup gap falls below tol_fp * M.

    Returns the even/odd midpoint per component.  ``initial`` overrides the
    harmonic-extension start (used for uniqueness cross-checks).
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if tol_fp <= 0:
        raise ValueError("tol_fp must be positive")
    t0 = time.perf_counter()
    boundary_arrays = data.boundary_arrays(g)
    M = data.max_boundary_value(g)
    tol_abs = tol_fp * M

    all_stats: list[LinearSolveStats] = []
    if initial is None:
        state = initialize(g, data, tol_linear)
        all_stats.extend(state.linear_stats)
    else:
        state = IterationState(0, tuple(f.copy() for f in initial), None, float("inf"))
    even = state.fields
    gaps: list[float] = []
    sweeps = 0
    while sweeps < max_sweeps:
        state = sweep(state, epsilon, data, tol_linear, boundary_arrays)
        sweeps += 1
        all_stats.extend(state.linear_stats)
        odd = state.fields
        gap = _sup_gap(even, odd)
        gaps.append(gap)
        if gap <= tol_abs:
            mid = tuple(
                ScalarField(g, 0.5 * (e.values + o.values)) for e, o in zip(even, odd)
            )
            return SolveResult(
                mid, epsilon, sweeps, gap, gaps, all_stats,
                time.perf_counter() - t0, even, odd,
            )
        if sweeps >= max_sweeps:
            break
        state = sweep(state, epsilon, data, tol_linear, boundary_arrays)
        sweeps += 1
        all_stats.extend(state.linear_stats)
        even = state.fields
    raise SolverError(
        f"fixed point not converged after {sweeps} sweeps (gap {gaps[-1]:.3e}, "
        f"target {tol_abs:.3e})",
        gap=gaps[-1] if gaps else None,
    )


def difference_harmonicity_check(r: SolveResult) -> float:
    """Max interior |Lap(u_1 - u_{i+1})| over i.

    The difference identity holds only for equal weights and unit
    exponents; for other data this is a report, not an invariant.
    """
    g = r.fields[0].grid
    interior = g.interior()
    worst = 0.0
    for i in range(1, r.m):
        d = ScalarField(g, r.fields[0].values - r.fields[i].values)
        lap = apply_laplacian(d).values
        worst = max(worst, float(np.abs(lap[interior]).max(initial=0.0)))
    return worst
