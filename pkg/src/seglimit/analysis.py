"""Norms, segregation diagnostics, interface geometry, free-boundary jump
checks, Laplacian-as-measure fields, and the epsilon convergence-rate study.

Interface extraction works on zero sets resolved only to grid accuracy:
a node belongs to the discrete zero set of component i when u_i < delta.
An edge between adjacent interior nodes realizes the (i, j) interface when
the zero-set membership pattern changes across it and the two endpoints
cover both zero sets.  Nodes sitting exactly on an interface belong to
several zero sets; edges interior to a shared zero band are excluded.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .elliptic_core import DEFAULT_TOL, ScalarField, apply_laplacian
from .epsilon_solver import DEFAULT_MAX_SWEEPS, DEFAULT_TOL_FP, SolveResult, solve_epsilon
from .errors import SolverError
from .geometry import Grid, NodeClass
from .limit_solver import LimitResult
from .problem_data import ProblemData

# pre-asymptotic pollution guard for the rate fit
RATE_FIT_RESIDUAL_CAP = 0.05


def default_zero_threshold(g: Grid, scale: float, tol_linear: float = DEFAULT_TOL) -> float:
    """Interfaces are resolved only to grid accuracy: max(10*tol*M, h*M)."""
    h = max(g.spacing)
    return max(10.0 * tol_linear * scale, h * scale)


def _cell_volume(g: Grid) -> float:
    return float(np.prod(g.spacing))


def norm_Lp(u: ScalarField, p: float) -> float:
    """Midpoint-rule discrete L^p norm over the domain nodes (sup for p=inf)."""
    vals = np.abs(u.values[u.grid.in_domain()])
    if math.isinf(p):
        return float(vals.max(initial=0.0))
    if p < 1:
        raise ValueError("p must be >= 1")
    return float((_cell_volume(u.grid) * (vals**p).sum()) ** (1.0 / p))


def segregation_residual(
    fields: tuple[ScalarField, ...], weights, exponents=None
) -> tuple[float, list[float]]:
    """(max nodal product, per-component reaction integrals int A_i F(U))."""
    g = fields[0].grid
    inside = g.in_domain()
    alphas = exponents.alphas if exponents is not None else (1.0,) * len(fields)
    F = np.ones(g.mask.shape)
    for f, a in zip(fields, alphas):
        F = F * (np.power(f.values, a) if a != 1 else f.values)
    max_product = float(F[inside].max(initial=0.0))
    A = weights.as_arrays(g)
    vol = _cell_volume(g)
    integrals = [float(vol * (A[i][inside] * F[inside]).sum()) for i in range(len(fields))]
    return max_product, integrals


@dataclass
class InterfaceEdge:
    a: tuple[int, ...]  # node index (ix[, iy])
    b: tuple[int, ...]
    midpoint: tuple[float, ...]
    normal: tuple[float, ...]


@dataclass
class InterfaceSet:
    grid: Grid
    delta: float
    zero_sets: np.ndarray  # (m, *mask shape) bool, restricted to interior nodes
    pairs: dict[tuple[int, int], list[InterfaceEdge]]
    degenerate: bool = False


def _node_index(g: Grid, flat: int) -> tuple[int, ...]:
    if g.ndim == 1:
        return (int(flat),)
    nx = g.dims[0]
    return (int(flat % nx), int(flat // nx))


def _node_coord(g: Grid, idx: tuple[int, ...]) -> tuple[float, ...]:
    return tuple(g.origin[ax] + g.spacing[ax] * idx[ax] for ax in range(g.ndim))


def _gradient(vals: np.ndarray, g: Grid, idx: tuple[int, ...]) -> np.ndarray:
    """Central-difference gradient at a node, one-sided at the lattice rim."""
    out = np.zeros(g.ndim)
    for ax in range(g.ndim):
        n = g.dims[ax]
        i = idx[ax]
        lo = tuple(idx[a] - (1 if a == ax else 0) for a in range(g.ndim))
        hi = tuple(idx[a] + (1 if a == ax else 0) for a in range(g.ndim))

        def val(j):
            return vals[j[0]] if g.ndim == 1 else vals[j[1], j[0]]

        h = g.spacing[ax]
        if 0 < i < n - 1:
            out[ax] = (val(hi) - val(lo)) / (2 * h)
        elif i == 0:
            out[ax] = (val(hi) - val(idx)) / h
        else:
            out[ax] = (val(idx) - val(lo)) / h
    return out


def extract_supports_and_interfaces(
    fields: tuple[ScalarField, ...], delta: float
) -> InterfaceSet:
    """Discrete zero sets and pairwise interface edges.

    The degenerate flag is raised when some pair's zero sets both cover the
    whole interior (e.g. all boundary data zero).
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    g = fields[0].grid
    m = len(fields)
    interior = g.interior()
    zero = np.stack([(f.values < delta) & interior for f in fields])

    n_interior = int(interior.sum())
    degenerate = False
    for i in range(m):
        for j in range(i + 1, m):
            if zero[i].sum() == n_interior and zero[j].sum() == n_interior:
                degenerate = True

    flat_int = interior.ravel()
    zflat = zero.reshape(m, -1)
    nx = g.dims[0]
    shape = g.mask.shape
    idx = np.arange(g.mask.size).reshape(shape)

    if g.ndim == 1:
        axis_pairs = [(idx[:-1].ravel(), idx[1:].ravel(), 0)]
    else:
        axis_pairs = [
            (idx[:, :-1].ravel(), idx[:, 1:].ravel(), 0),
            (idx[:-1, :].ravel(), idx[1:, :].ravel(), 1),
        ]

    pairs: dict[tuple[int, int], list[InterfaceEdge]] = {
        (i + 1, j + 1): [] for i in range(m) for j in range(i + 1, m)
    }
    for p_all, q_all, axis in axis_pairs:
        ok = flat_int[p_all] & flat_int[q_all]
        p_arr, q_arr = p_all[ok], q_all[ok]
        if p_arr.size == 0:
            continue
        zp = zflat[:, p_arr]
        zq = zflat[:, q_arr]
        changed = np.any(zp != zq, axis=0)
        for i in range(m):
            for j in range(i + 1, m):
                hit = changed & ((zp[i] & zq[j]) | (zp[j] & zq[i]))
                if not hit.any():
                    continue
                d = fields[i].values - fields[j].values
                lst = pairs[(i + 1, j + 1)]
                for pf, qf in zip(p_arr[hit], q_arr[hit]):
                    ia = _node_index(g, pf)
                    ib = _node_index(g, qf)
                    ca = _node_coord(g, ia)
                    cb = _node_coord(g, ib)
                    mid = tuple(0.5 * (a + b) for a, b in zip(ca, cb))
                    grad = 0.5 * (_gradient(d, g, ia) + _gradient(d, g, ib))
                    nrm = float(np.linalg.norm(grad))
                    if nrm > 1e-30:
                        normal = tuple(float(v / nrm) for v in grad)
                    else:  # flat difference: fall back to the edge direction
                        e = np.zeros(g.ndim)
                        e[axis] = 1.0
                        normal = tuple(e)
                    lst.append(InterfaceEdge(ia, ib, mid, normal))
    return InterfaceSet(g, delta, zero, pairs, degenerate)


def laplacian_measure(u: ScalarField, g: Grid | None = None) -> ScalarField:
    """h * Lap_h(u): the discrete interface Dirac density.

    Values approximate the normal-derivative jump along interfaces and
    vanish where u is discretely harmonic.
    """
    g = g or u.grid
    lap = apply_laplacian(u)
    return ScalarField(g, g.spacing[0] * lap.values)


@dataclass
class JumpPairReport:
    pair: tuple[int, int]
    edges: int
    skipped: int
    max_balance: float  # condition (1): opposing normal derivatives
    max_transfer: float  # condition (2): third-component derivative jump
    balance_residuals: list[float] = field(default_factory=list)
    transfer_residuals: list[float] = field(default_factory=list)


def jump_condition_check(L: LimitResult, I: InterfaceSet) -> dict[tuple[int, int], JumpPairReport]:
    """Free-boundary jump conditions from one-sided normal derivatives.

    For each interface edge the derivative of each component is estimated
    by a 2-point first-order difference on each side along the edge axis.
    Checked identities (unit-weight scope): the two meeting components have
    opposite one-sided normal derivatives, and any third component's
    derivative jump equals the meeting component's derivative.

    The identities involve one-sided traces from inside the respective zero
    regions, so an edge is evaluated only when its p-side stencil lies in
    the zero set of u_j and its q-side stencil in the zero set of u_i;
    edges failing that (degenerate lower-dimensional zero sets, interfaces
    hugging the outer boundary) are skipped and counted.
    """
    g = I.grid
    in_domain = g.in_domain()

    def value(f: ScalarField, idx):
        return f.values[idx[0]] if g.ndim == 1 else f.values[idx[1], idx[0]]

    def inside(idx):
        for ax in range(g.ndim):
            if not 0 <= idx[ax] < g.dims[ax]:
                return False
        return bool(in_domain[idx[0]] if g.ndim == 1 else in_domain[idx[1], idx[0]])

    def in_zero(f: ScalarField, idx):
        # half-delta guard band: genuine zero regions are exact zeros up to
        # solver noise, while a component vanishing only on a lower
        # dimensional set grows like h * slope away from it
        return inside(idx) and value(f, idx) < 0.5 * I.delta

    reports: dict[tuple[int, int], JumpPairReport] = {}
    for (i, j), edges in I.pairs.items():
        rep = JumpPairReport((i, j), 0, 0, 0.0, 0.0)
        ui = L.fields[i - 1]
        uj = L.fields[j - 1]
        for e in edges:
            # p: side where u_i lives (the zero region of u_j); the
            # difference u_i - u_j increases toward it
            da = value(ui, e.a) - value(uj, e.a)
            db = value(ui, e.b) - value(uj, e.b)
            if da > db:
                p, q = e.a, e.b
            elif db > da:
                p, q = e.b, e.a
            else:
                rep.skipped += 1
                continue
            axis = 0 if p[0] != q[0] else 1
            h = g.spacing[axis]
            step = 1 if q[axis] > p[axis] else -1
            p_back = tuple(p[a] - (step if a == axis else 0) for a in range(g.ndim))
            q_fwd = tuple(q[a] + (step if a == axis else 0) for a in range(g.ndim))
            if not (
                in_zero(uj, p) and in_zero(uj, p_back)
                and in_zero(ui, q) and in_zero(ui, q_fwd)
            ):
                rep.skipped += 1
                continue

            def d_p(f: ScalarField) -> float:
                return (value(f, p) - value(f, p_back)) / (step * h)

            def d_q(f: ScalarField) -> float:
                return (value(f, q_fwd) - value(f, q)) / (step * h)

            r1 = abs(d_p(ui) + d_q(uj))
            rep.balance_residuals.append(r1)
            for k in range(1, L.m + 1):
                if k in (i, j):
                    continue
                uk = L.fields[k - 1]
                r2 = abs((d_p(uk) - d_q(uk)) - d_p(ui))
                rep.transfer_residuals.append(r2)
            rep.edges += 1
        rep.max_balance = max(rep.balance_residuals, default=0.0)
        rep.max_transfer = max(rep.transfer_residuals, default=0.0)
        reports[(i, j)] = rep
    return reports


@dataclass
class RateRow:
    epsilon: float
    lmp1: tuple[float, ...] | None  # per-component L^{m+1} distance; None on failure
    sup: tuple[float, ...] | None
    failed: bool = False
    message: str = ""


@dataclass
class RateTable:
    rows: list[RateRow]
    pivot: int
    slope: float | None
    intercept: float | None
    fit_residual: float | None
    dropped_largest: bool = False


def _fit_loglog(eps: list[float], dist: list[float]):
    x = np.log10(eps)
    y = np.log10(dist)
    coef = np.polyfit(x, y, 1)
    resid = y - np.polyval(coef, x)
    return float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(resid**2)))


def rate_study(
    g: Grid,
    data: ProblemData,
    eps_list: list[float],
    limit: LimitResult,
    pivot: int | None = None,
    tol_fp: float = DEFAULT_TOL_FP,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    tol_linear: float = DEFAULT_TOL,
    threads: int = 1,
) -> RateTable:
    """Distance-to-limit table over a decreasing epsilon ladder with a
    log-log slope fit for the pivot component.

    The largest epsilon is dropped and the fit redone when the fit residual
    exceeds the pre-asymptotic cap; single-row tables carry no slope.
    """
    eps_list = [float(e) for e in eps_list]
    if any(e <= 0 for e in eps_list):
        raise ValueError("epsilon values must be positive")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("epsilon list must be strictly decreasing")
    pivot = limit.pivot if pivot is None else pivot
    m = data.m
    p_norm = m + 1

    def run(eps: float) -> RateRow:
        try:
            r = solve_epsilon(g, data, eps, tol_fp, max_sweeps, tol_linear)
        except SolverError as exc:
            return RateRow(eps, None, None, True, str(exc))
        lmp1 = tuple(
            norm_Lp(ScalarField(g, r.fields[i].values - limit.fields[i].values), p_norm)
            for i in range(m)
        )
        sup = tuple(
            norm_Lp(ScalarField(g, r.fields[i].values - limit.fields[i].values), math.inf)
            for i in range(m)
        )
        return RateRow(eps, lmp1, sup)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(run, eps_list))
    else:
        rows = [run(e) for e in eps_list]

    pts = [(r.epsilon, r.lmp1[pivot - 1]) for r in rows if not r.failed and r.lmp1[pivot - 1] > 0]
    slope = intercept = resid = None
    dropped = False
    if len(pts) >= 2:
        slope, intercept, resid = _fit_loglog([p[0] for p in pts], [p[1] for p in pts])
        if resid > RATE_FIT_RESIDUAL_CAP and len(pts) >= 3:
            slope, intercept, resid = _fit_loglog(
                [p[0] for p in pts[1:]], [p[1] for p in pts[1:]]
            )
            dropped = True
    return RateTable(rows, pivot, slope, intercept, resid, dropped)


def discrete_energy(fields) -> float:
    """Forward-difference Dirichlet energy summed over all components."""
    if isinstance(fields, ScalarField):
        fields = (fields,)
    g = fields[0].grid
    inside = g.in_domain()
    vol = _cell_volume(g)
    total = 0.0
    for f in fields:
        v = f.values
        if g.ndim == 1:
            ok = inside[:-1] & inside[1:]
            total += vol * float((((v[1:] - v[:-1]) / g.spacing[0])[ok] ** 2).sum())
        else:
            okx = inside[:, :-1] & inside[:, 1:]
            total += vol * float((((v[:, 1:] - v[:, :-1]) / g.spacing[0])[okx] ** 2).sum())
            oky = inside[:-1, :] & inside[1:, :]
            total += vol * float((((v[1:, :] - v[:-1, :]) / g.spacing[1])[oky] ** 2).sum())
    return total


def solve_vs_limit_distances(r: SolveResult, limit: LimitResult) -> list[dict]:
    """Per-component L^{m+1} and sup distances between an epsilon solve and
    the explicit limit (shared grid)."""
    g = r.fields[0].grid
    p = r.m + 1
    out = []
    for i in range(r.m):
        diff = ScalarField(g, r.fields[i].values - limit.fields[i].values)
        out.append(
            {"component": i + 1, "lmp1": norm_Lp(diff, p), "sup": norm_Lp(diff, math.inf)}
        )
    return out
