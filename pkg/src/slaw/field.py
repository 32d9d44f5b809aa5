"""Split vector fields over the positive orthant, plus the model-file DSL.

A split field is dx_i/dt = v_plus_i(x) - v_minus_i(x) where every
production term v_plus_i and decay term v_minus_i must stay strictly
positive on the domain of interest.  Model files are line oriented:

    # comment to end of line
    var x, y              declares the ordered state variables
    param K = 3.375       binds a named numeric constant
    plus x  : 3/(1+y^2)   production term for x
    minus x : x           decay term for x

Each declared variable needs exactly one ``plus`` and one ``minus``
line.  Right-hand sides follow the grammar in :mod:`slaw.expr`;
identifiers must be declared variables or parameters, and parameters
are bound to their numeric values at load time (reload to change one).
Declarations may appear anywhere in the file.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ExprSyntaxError, ModelError, NonFiniteError, NonPositiveFieldError
from .expr import Expr, differentiate, parse

__all__ = ["SplitField", "parse_model", "load_model"]

_IDENT_RE = re.compile(r"^[A-Za-z_]\w*$")
_VAR_RE = re.compile(r"^var\s+(.+)$")
_PARAM_RE = re.compile(r"^param\s+([A-Za-z_]\w*)\s*=\s*(\S+)\s*$")
_TERM_RE = re.compile(r"^(plus|minus)\s+([A-Za-z_]\w*)\s*:\s*(.+)$")


@dataclass
class SplitField:
    """A production/decay vector field with cached symbolic partials.

    Treated as immutable after construction.  ``pos_floor`` is the
    threshold below which a term value counts as non-positive.
    """

    names: tuple[str, ...]
    params: dict[str, float]
    plus: tuple[Expr, ...]
    minus: tuple[Expr, ...]
    pos_floor: float = 1e-300
    d_plus: tuple[tuple[Expr, ...], ...] = field(init=False, repr=False)
    d_minus: tuple[tuple[Expr, ...], ...] = field(init=False, repr=False)

    def __post_init__(self):
        self.names = tuple(self.names)
        self.plus = tuple(self.plus)
        self.minus = tuple(self.minus)
        n = len(self.names)
        if n == 0:
            raise ModelError("a model needs at least one variable")
        if len(set(self.names)) != n:
            raise ModelError("duplicate variable name")
        if len(self.plus) != n or len(self.minus) != n:
            raise ModelError("need exactly one production and one decay term per variable")
        declared = set(self.names) | set(self.params)
        for term in (*self.plus, *self.minus):
            for nm in term.names():
                if nm not in declared:
                    raise ModelError(f"unknown identifier '{nm}'")
        self.d_plus = tuple(
            tuple(differentiate(t, nm) for nm in self.names) for t in self.plus
        )
        self.d_minus = tuple(
            tuple(differentiate(t, nm) for nm in self.names) for t in self.minus
        )

    @property
    def n(self) -> int:
        return len(self.names)

    def _point(self, x: np.ndarray) -> dict[str, float]:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ValueError(f"expected a point with {self.n} components, got shape {x.shape}")
        if not np.all(np.isfinite(x)) or np.any(x <= 0.0):
            raise ValueError("point must be strictly positive and finite")
        return dict(zip(self.names, x.tolist()))

    def eval_split(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Evaluate (v_plus, v_minus) at a strictly positive point.

        Raises NonPositiveFieldError if any term comes out at or below
        ``pos_floor`` and NonFiniteError if evaluation blows up.
        """
        point = self._point(x)
        n = self.n
        vp = np.empty(n)
        vm = np.empty(n)
        for sign, terms, out in (("+", self.plus, vp), ("-", self.minus, vm)):
            for i, term in enumerate(terms):
                try:
                    v = term.evaluate(point, self.params)
                except NonFiniteError as exc:
                    kind = "production" if sign == "+" else "decay"
                    raise NonFiniteError(f"{kind} term {i + 1}: {exc}") from None
                if v <= self.pos_floor:
                    raise NonPositiveFieldError(i, sign, np.asarray(x, dtype=float), v)
                out[i] = v
        return vp, vm

    def rhs(self, x) -> np.ndarray:
        vp, vm = self.eval_split(x)
        return vp - vm

    def partials(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Evaluate the cached symbolic partials of both term families."""
        point = self._point(x)
        n = self.n
        dp = np.empty((n, n))
        dm = np.empty((n, n))
        for rows, out, kind in ((self.d_plus, dp, "production"), (self.d_minus, dm, "decay")):
            for i in range(n):
                for j in range(n):
                    try:
                        out[i, j] = rows[i][j].evaluate(point, self.params)
                    except NonFiniteError as exc:
                        raise NonFiniteError(
                            f"partial of {kind} term {i + 1} wrt {self.names[j]}: {exc}"
                        ) from None
        return dp, dm

    def jacobian(self, x) -> np.ndarray:
        """Jacobian of rhs at x, from the cached symbolic partials."""
        dp, dm = self.partials(x)
        return dp - dm


def parse_model(text: str) -> SplitField:
    """Parse model-file text into a SplitField."""
    names: list[str] = []
    params: dict[str, float] = {}
    term_src: dict[tuple[str, str], tuple[str, int]] = {}

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _VAR_RE.match(line)
        if m:
            for piece in m.group(1).split(","):
                nm = piece.strip()
                if not _IDENT_RE.match(nm):
                    raise ModelError(f"line {lineno}: bad variable name '{nm}'")
                if nm in names or nm in params:
                    raise ModelError(f"line {lineno}: duplicate name '{nm}'")
                names.append(nm)
            continue
        m = _PARAM_RE.match(line)
        if m:
            nm, value = m.group(1), m.group(2)
            if nm in params or nm in names:
                raise ModelError(f"line {lineno}: duplicate name '{nm}'")
            try:
                params[nm] = float(value)
            except ValueError:
                raise ModelError(f"line {lineno}: parameter '{nm}' needs a numeric value") from None
            continue
        m = _TERM_RE.match(line)
        if m:
            sign = "+" if m.group(1) == "plus" else "-"
            target = m.group(2)
            key = (sign, target)
            if key in term_src:
                raise ModelError(f"line {lineno}: duplicate {m.group(1)} term for '{target}'")
            term_src[key] = (m.group(3).strip(), lineno)
            continue
        raise ModelError(f"line {lineno}: unrecognized directive '{line}'")

    if not names:
        raise ModelError("no variables declared")

    for (sign, target), (_, lineno) in term_src.items():
        if target not in names:
            raise ModelError(f"line {lineno}: term for undeclared variable '{target}'")

    param_names = frozenset(params)
    declared = set(names) | params.keys()

    def build(sign: str, nm: str) -> Expr:
        word = "plus" if sign == "+" else "minus"
        if (sign, nm) not in term_src:
            raise ModelError(f"missing {word} term for '{nm}'")
        src, lineno = term_src[(sign, nm)]
        try:
            tree = parse(src, parameters=param_names)
        except ExprSyntaxError as exc:
            raise ModelError(f"line {lineno}: {exc}") from None
        for ident in sorted(tree.names() - declared):
            raise ModelError(f"line {lineno}: unknown identifier '{ident}'")
        return tree

    plus = tuple(build("+", nm) for nm in names)
    minus = tuple(build("-", nm) for nm in names)
    return SplitField(names=tuple(names), params=params, plus=plus, minus=minus)


def load_model(path) -> SplitField:
    """Load a model file from disk."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        return parse_model(text)
    except ModelError as exc:
        raise ModelError(f"{path}: {exc}") from None
