"""Boundary data, coupling weights, and exponents.

Boundary data are piecewise closed-form expressions in the boundary
parameter (theta on disks, x/y on rectangle sides, constants on interval
endpoints).  The expression grammar is deliberately small: arithmetic on
``x``, ``y``, ``theta`` and ``pi`` with ``sin``, ``cos``, ``abs``,
``sqrt`` and powers (``^`` is accepted as a synonym for ``**``).

Validation covers the two structural assumptions on the data: the partial
segregation of the boundary values (their product vanishes on the whole
boundary) and the coupling-weight inequalities 0 < A_i <= sum_{j!=i} A_j.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .geometry import RECT_SIDES, BoundaryPoint, Grid, boundary_points

_TWO_PI = 2 * math.pi

_FUNCS = {"sin": math.sin, "cos": math.cos, "abs": abs, "sqrt": math.sqrt}
_CONSTS = {"pi": math.pi}
_VARS = ("x", "y", "theta")

_ALLOWED_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)
_ALLOWED_UNARY = (ast.USub, ast.UAdd)


def _check_expr_node(node: ast.AST, text: str) -> None:
    if isinstance(node, ast.Expression):
        _check_expr_node(node.body, text)
    elif isinstance(node, ast.BinOp) and isinstance(node.op, _ALLOWED_BINOPS):
        _check_expr_node(node.left, text)
        _check_expr_node(node.right, text)
    elif isinstance(node, ast.UnaryOp) and isinstance(node.op, _ALLOWED_UNARY):
        _check_expr_node(node.operand, text)
    elif isinstance(node, ast.Call):
        if not (isinstance(node.func, ast.Name) and node.func.id in _FUNCS) or node.keywords:
            raise ConfigError(f"unsupported function call in expression {text!r}")
        if len(node.args) != 1:
            raise ConfigError(f"functions take one argument in expression {text!r}")
        _check_expr_node(node.args[0], text)
    elif isinstance(node, ast.Name):
        if node.id not in _VARS and node.id not in _CONSTS:
            raise ConfigError(f"unknown name {node.id!r} in expression {text!r}")
    elif isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)):
            raise ConfigError(f"non-numeric constant in expression {text!r}")
    else:
        raise ConfigError(f"unsupported syntax in expression {text!r}")


def compile_expression(text: str):
    """Compile an expression from the boundary-data grammar to a callable
    taking keyword variables (x, y, theta)."""
    source = text.replace("^", "**").strip()
    if not source:
        raise ConfigError("empty expression")
    try:
        tree = ast.parse(source, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {text!r}: {exc.msg}") from None
    _check_expr_node(tree, text)
    code = compile(tree, "<boundary-expr>", "eval")

    def evaluate(**env) -> float:
        scope = dict(_FUNCS)
        scope.update(_CONSTS)
        scope.update(env)
        try:
            return float(eval(code, {"__builtins__": {}}, scope))  # noqa: S307 - ast-whitelisted
        except Exception as exc:
            raise ConfigError(f"failed to evaluate {text!r}: {exc}") from None

    return evaluate


# ---------------------------------------------------------------------------
# piece selectors


@dataclass(frozen=True)
class ThetaRange:
    """Half-open angular range [lo, hi); hi may exceed 2*pi to wrap."""

    lo: float
    hi: float

    def matches(self, theta: float) -> bool:
        t = theta % _TWO_PI
        if self.hi <= _TWO_PI:
            return self.lo <= t < self.hi
        return t >= self.lo or t < self.hi - _TWO_PI


@dataclass(frozen=True)
class SideSelector:
    side: str

    def matches_side(self, side: str) -> bool:
        return self.side == side


@dataclass(frozen=True)
class EndSelector:
    end: str


@dataclass(frozen=True)
class AllSelector:
    pass


def parse_selector(text: str):
    text = text.strip()
    if text == "all":
        return AllSelector()
    if text.startswith("side="):
        side = text[5:].strip()
        if side not in RECT_SIDES:
            raise ConfigError(f"unknown side {side!r} (expected one of {RECT_SIDES})")
        return SideSelector(side)
    if text.startswith("end="):
        end = text[4:].strip()
        if end not in ("left", "right"):
            raise ConfigError(f"unknown endpoint {end!r} (expected left or right)")
        return EndSelector(end)
    if text.startswith("theta in"):
        rng = text[len("theta in"):].strip()
        if not (rng.startswith("[") and rng.endswith(")")):
            raise ConfigError(f"theta range must be half-open [lo, hi): {text!r}")
        lo_s, _, hi_s = rng[1:-1].partition(",")
        if not _:
            raise ConfigError(f"theta range needs two bounds: {text!r}")
        lo = compile_expression(lo_s)()
        hi = compile_expression(hi_s)()
        if not (0 <= lo < _TWO_PI and lo < hi <= 2 * _TWO_PI):
            raise ConfigError(f"theta range out of order: {text!r}")
        return ThetaRange(lo, hi)
    raise ConfigError(f"cannot parse piece selector {text!r}")


@dataclass(frozen=True)
class Piece:
    selector: object
    expr_text: str
    expr: object = field(compare=False)

    @staticmethod
    def parse(text: str) -> "Piece":
        sel_s, sep, expr_s = text.partition(":")
        if not sep:
            raise ConfigError(f"piece needs the form '<selector>: <expr>': {text!r}")
        return Piece(parse_selector(sel_s), expr_s.strip(), compile_expression(expr_s))


@dataclass(frozen=True)
class BoundaryDatum:
    """Piecewise boundary values for one component; 0 outside all pieces."""

    component: int
    pieces: tuple[Piece, ...]

    def piece_for(self, p: BoundaryPoint) -> Piece | None:
        """First piece whose selector matches; None means the default 0."""
        for piece in self.pieces:
            sel = piece.selector
            if isinstance(sel, AllSelector):
                return piece
            if isinstance(sel, ThetaRange) and isinstance(p.param, float):
                if sel.matches(p.param):
                    return piece
            elif isinstance(sel, SideSelector) and isinstance(p.param, tuple):
                if sel.matches_side(p.param[0]):
                    return piece
            elif isinstance(sel, EndSelector) and isinstance(p.param, str):
                if sel.end == p.param:
                    return piece
        return None


def eval_boundary(d: BoundaryDatum, p: BoundaryPoint) -> float:
    """Evaluate a boundary datum at a boundary point.

    Negative values are a configuration error, never clamped.
    """
    piece = d.piece_for(p)
    if piece is None:
        return 0.0
    env = {"x": p.coord[0]}
    if len(p.coord) > 1:
        env["y"] = p.coord[1]
    if isinstance(p.param, float):
        env["theta"] = p.param
    value = piece.expr(**env)
    if not math.isfinite(value):
        raise ConfigError(f"boundary expression {piece.expr_text!r} is not finite at {p.coord}")
    if value < 0:
        raise ConfigError(
            f"boundary datum {d.component} is negative ({value:g}) at {p.coord}; "
            "boundary data must be nonnegative"
        )
    return value


def boundary_value_array(d: BoundaryDatum, g: Grid) -> np.ndarray:
    """Full-grid array with the datum evaluated at boundary nodes, 0 elsewhere."""
    out = np.zeros(g.dims[::-1] if g.ndim == 2 else g.dims)
    for p in boundary_points(g):
        if g.ndim == 1:
            out[p.index[0]] = eval_boundary(d, p)
        else:
            out[p.index[1], p.index[0]] = eval_boundary(d, p)
    return out


@dataclass(frozen=True)
class Exponents:
    """Reaction exponents alpha_i, one per component, each >= 1."""

    alphas: tuple[float, ...]

    def __post_init__(self):
        for i, a in enumerate(self.alphas, start=1):
            if not a >= 1:
                raise ConfigError(f"alpha_{i} = {a} violates alpha_i >= 1")


@dataclass(frozen=True, eq=False)
class CouplingWeights:
    """Per-component weights A_i: shape (m,) constants or (m, *grid shape)."""

    values: np.ndarray

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def is_constant(self) -> bool:
        return self.values.ndim == 1

    def as_arrays(self, g: Grid) -> np.ndarray:
        shape = g.mask.shape
        if self.is_constant:
            return np.broadcast_to(self.values.reshape((self.m,) + (1,) * len(shape)),
                                   (self.m,) + shape)
        if self.values.shape[1:] != shape:
            raise ConfigError("tabulated coupling weights do not match the grid shape")
        return self.values

    def all_equal(self) -> bool:
        """True when all A_i coincide (the scope of the explicit limit)."""
        return bool(np.all(self.values == self.values[0]))


def validate_coupling(w: CouplingWeights, g: Grid) -> list[dict]:
    """Nodes (or constants) violating 0 < A_i or A_i <= sum_{j != i} A_j."""
    report: list[dict] = []
    arrays = w.as_arrays(g)
    where = g.interior() | g.boundary()
    total = arrays.sum(axis=0)
    for i in range(w.m):
        ai = arrays[i]
        bad_pos = (~(ai > 0)) & where
        bad_sum = (ai > total - ai) & where
        if w.is_constant:
            # constants violate everywhere or nowhere; report once
            if bad_pos.any():
                report.append({"component": i + 1, "kind": "positivity", "value": float(w.values[i])})
            if bad_sum.any():
                report.append({"component": i + 1, "kind": "dominance", "value": float(w.values[i])})
        else:
            for idx in np.argwhere(bad_pos):
                report.append({"component": i + 1, "kind": "positivity", "node": tuple(int(v) for v in idx)})
            for idx in np.argwhere(bad_sum):
                report.append({"component": i + 1, "kind": "dominance", "node": tuple(int(v) for v in idx)})
    return report


def validate_partial_segregation(
    data: list[BoundaryDatum], g: Grid, tol: float | None = None
) -> list[tuple[BoundaryPoint, float]]:
    """Boundary nodes where the product of all boundary data exceeds tol.

    An empty report means the partial segregation assumption holds on the
    discrete boundary.  The default tolerance is 1e-12 * M**m with M the
    largest boundary value (scale-aware zero test).
    """
    if len(data) < 2:
        raise ConfigError("partial segregation needs at least 2 components")
    pts = boundary_points(g)
    values = np.array([[eval_boundary(d, p) for p in pts] for d in data])
    if tol is None:
        M = float(values.max(initial=0.0))
        tol = 1e-12 * max(M, 1e-300) ** len(data)
    products = values.prod(axis=0)
    return [(pts[k], float(products[k])) for k in np.nonzero(products > tol)[0]]


@dataclass(frozen=True)
class ProblemData:
    """Validated problem data bundle: boundary data, weights, exponents."""

    boundary: tuple[BoundaryDatum, ...]
    weights: CouplingWeights
    exponents: Exponents

    @property
    def m(self) -> int:
        return len(self.boundary)

    def __post_init__(self):
        if not (self.m == self.weights.m == len(self.exponents.alphas)):
            raise ConfigError(
                f"component count mismatch: {self.m} boundary data, "
                f"{self.weights.m} weights, {len(self.exponents.alphas)} exponents"
            )

    def boundary_arrays(self, g: Grid) -> list[np.ndarray]:
        return [boundary_value_array(d, g) for d in self.boundary]

    def max_boundary_value(self, g: Grid) -> float:
        b = g.boundary()
        return max(float(arr[b].max(initial=0.0)) for arr in self.boundary_arrays(g))

    def validate(self, g: Grid, tol: float | None = None) -> dict:
        """Run both assumption checks; empty lists mean valid."""
        return {
            "segregation": validate_partial_segregation(list(self.boundary), g, tol),
            "coupling": validate_coupling(self.weights, g),
        }
