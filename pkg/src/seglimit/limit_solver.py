"""Explicit construction of the vanishing-epsilon limit.

All pairwise differences against a pivot component are harmonic with
boundary data phi_p - phi_j, independent of epsilon.  The limit is then
assembled pointwise: the pivot is the positive part of the largest
difference field and every other component is recovered by subtraction.
By construction the fields are nonnegative, their product vanishes at
every node, and the pivot is a pointwise maximum of harmonic fields and 0,
hence discretely subharmonic.  The construction is pivot-independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .elliptic_core import DEFAULT_TOL, LinearSolveStats, ScalarField, solve_harmonic
from .geometry import Grid
from .problem_data import ProblemData, boundary_value_array


@dataclass
class LimitResult:
    fields: tuple[ScalarField, ...]
    differences: tuple[ScalarField, ...]  # w_j = u_pivot - u_j for j != pivot, component order
    difference_components: tuple[int, ...]  # 1-based component index of each difference
    pivot: int  # 1-based
    linear_stats: list[LinearSolveStats]

    @property
    def m(self) -> int:
        return len(self.fields)


def harmonic_differences(
    g: Grid, data: ProblemData, pivot: int = 1, tol_linear: float = DEFAULT_TOL
):
    """Harmonic fields with boundary data phi_pivot - phi_j for j != pivot.

    Returns (fields, component_indices, stats); indices are 1-based.
    """
    if not 1 <= pivot <= data.m:
        raise ValueError(f"pivot {pivot} out of range 1..{data.m}")
    phi = data.boundary_arrays(g)
    fields = []
    comps = []
    stats = []
    for j in range(data.m):
        if j + 1 == pivot:
            continue
        w, s = solve_harmonic(g, phi[pivot - 1] - phi[j], tol_linear)
        fields.append(w)
        comps.append(j + 1)
        stats.append(s)
    return fields, tuple(comps), stats


def construct_limit(
    w_fields: list[ScalarField], components: tuple[int, ...], pivot: int,
    stats: list[LinearSolveStats] | None = None,
) -> LimitResult:
    """Assemble the limit from difference fields sharing one grid.

    Ties in the max need no tie-breaking; nodes where several differences
    coincide are exactly the multi-interface points.
    """
    g = w_fields[0].grid
    m = len(w_fields) + 1
    stacked = np.stack([w.values for w in w_fields] + [np.zeros(g.mask.shape)])
    u_pivot = stacked.max(axis=0)
    outside = ~g.in_domain()
    u_pivot[outside] = 0.0

    fields: list[ScalarField | None] = [None] * m
    diffs: list[ScalarField] = []
    for w, comp in zip(w_fields, components):
        vals = u_pivot - w.values
        vals[outside] = 0.0
        fields[comp - 1] = ScalarField(g, vals)
        # store the difference as actually representable, so that
        # u_pivot - u_j == w_j holds bitwise; it matches the harmonic
        # field w up to one rounding
        diffs.append(ScalarField(g, u_pivot - vals))
    fields[pivot - 1] = ScalarField(g, u_pivot)
    return LimitResult(tuple(fields), tuple(diffs), components, pivot, stats or [])


def solve_limit(
    g: Grid, data: ProblemData, pivot: int = 1, tol_linear: float = DEFAULT_TOL
) -> LimitResult:
    w, comps, stats = harmonic_differences(g, data, pivot, tol_linear)
    return construct_limit(w, comps, pivot, stats)


def pivot_equivalence_check(
    g: Grid, data: ProblemData, p: int, q: int, tol_linear: float = DEFAULT_TOL
) -> float:
    """Max sup-norm discrepancy across components between pivots p and q."""
    if p == q:
        raise ValueError("pivots must differ")
    rp = solve_limit(g, data, p, tol_linear)
    rq = solve_limit(g, data, q, tol_linear)
    return max(
        float(np.abs(a.values - b.values).max())
        for a, b in zip(rp.fields, rq.fields)
    )
