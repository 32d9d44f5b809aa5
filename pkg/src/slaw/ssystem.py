"""S-systems: power-law production/decay systems and their equilibria.

An S-system has components dx_i/dt = alpha_i * prod_j x_j^g_ij
- beta_i * prod_j x_j^h_ij with strictly positive rates alpha, beta and
real exponent matrices G, H, considered on the open positive orthant.
Writing b_i = beta_i / alpha_i, positive equilibria satisfy
x^(G-H) = b; when G - H is invertible the unique solution comes from
the log-linear system (G - H) ln x = ln b, which is solved by LU with
partial pivoting (the inverse is never formed).  All monomial products
are evaluated in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import networkx as nx
import numpy as np

from .errors import DegenerateError, NoConvergenceError, NonFiniteError

__all__ = [
    "SSystem",
    "EquilibriumInfo",
    "SignVerdict",
    "ASYMPTOTICALLY_STABLE",
    "UNSTABLE",
    "NON_HYPERBOLIC",
    "power_vector",
    "equilibrium",
    "jacobian_at_equilibrium",
    "eigenvalues",
    "classify",
    "sign_semi_stable",
    "ssystem_to_dict",
    "ssystem_from_dict",
]

ASYMPTOTICALLY_STABLE = "asymptotically-stable"
UNSTABLE = "unstable"
NON_HYPERBOLIC = "non-hyperbolic"

MAX_EIG_DIM = 64


def _positive_point(x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"expected a point with {n} components, got shape {x.shape}")
    if not np.all(np.isfinite(x)) or np.any(x <= 0.0):
        raise ValueError("point must be strictly positive and finite")
    return x


@dataclass(frozen=True)
class SSystem:
    """Immutable S-system (alpha, beta, G, H)."""

    alpha: np.ndarray
    beta: np.ndarray
    G: np.ndarray
    H: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        b = np.atleast_1d(np.asarray(self.beta, dtype=float))
        G = np.atleast_2d(np.asarray(self.G, dtype=float))
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        n = a.shape[0]
        if b.shape != (n,) or G.shape != (n, n) or H.shape != (n, n):
            raise ValueError("inconsistent S-system shapes")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("rates must be finite")
        if np.any(a <= 0.0) or np.any(b <= 0.0):
            raise ValueError("rates alpha and beta must be strictly positive")
        if not (np.all(np.isfinite(G)) and np.all(np.isfinite(H))):
            raise ValueError("kinetic orders must be finite")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "H", H)

    @property
    def n(self) -> int:
        return self.alpha.shape[0]

    def rhs(self, x) -> np.ndarray:
        """Vector field value at a strictly positive point."""
        x = _positive_point(x, self.n)
        lx = np.log(x)
        with np.errstate(over="ignore"):
            prod = np.exp(np.log(self.alpha) + self.G @ lx)
            dec = np.exp(np.log(self.beta) + self.H @ lx)
            out = prod - dec
        if not np.all(np.isfinite(out)):
            raise NonFiniteError("S-system value overflowed")
        return out


def power_vector(x, A) -> np.ndarray:
    """Componentwise power product: result_i = prod_j x_j^A_ij."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    x = _positive_point(x, A.shape[1])
    with np.errstate(over="ignore"):
        out = np.exp(A @ np.log(x))
    if not np.all(np.isfinite(out)):
        raise NonFiniteError("power product overflowed")
    return out


@dataclass(frozen=True)
class SignVerdict:
    """Outcome of the qualitative sign semi-stability test.

    ``condition`` is "i", "ii" or "iii" for the first violated
    condition; ``witness`` holds 0-based indices (the diagonal entry,
    the off-diagonal pair, or the offending cycle).
    """

    semi_stable: bool
    condition: str | None = None
    witness: tuple[int, ...] | None = None

    def describe(self) -> str:
        if self.semi_stable:
            return "sign semi-stable"
        if self.condition == "i":
            i = self.witness[0] + 1
            return f"not sign semi-stable: condition (i), entry ({i},{i})"
        if self.condition == "ii":
            i, j = (k + 1 for k in self.witness)
            return f"not sign semi-stable: condition (ii), entries ({i},{j})/({j},{i})"
        cyc = [k + 1 for k in self.witness]
        path = "->".join(str(k) for k in (*cyc, cyc[0]))
        return f"not sign semi-stable: condition (iii), cycle {path}"


@dataclass(frozen=True)
class EquilibriumInfo:
    """Equilibrium of an S-system together with its local verdicts."""

    x_eq: np.ndarray
    b: np.ndarray
    det_gh: float
    jacobian: np.ndarray
    eigenvalues: np.ndarray
    classification: str
    qrm: SignVerdict


def equilibrium(s: SSystem, tol_det: float = 1e-12, tol_hyp: float | None = None,
                zero_tol: float | None = None) -> EquilibriumInfo:
    """Unique positive equilibrium of an S-system with invertible G - H.

    Raises DegenerateError when |det(G-H)| <= tol_det * ||G-H||_inf^n.
    ``tol_hyp`` and ``zero_tol`` are passed through to `classify` and
    `sign_semi_stable`.
    """
    x_eq = solve_equilibrium(s, tol_det)
    P = s.G - s.H
    jac = jacobian_at_equilibrium(s, x_eq)
    eigs = eigenvalues(jac)
    return EquilibriumInfo(
        x_eq=x_eq,
        b=s.beta / s.alpha,
        det_gh=float(np.linalg.det(P)),
        jacobian=jac,
        eigenvalues=eigs,
        classification=classify(eigs, tol_hyp),
        qrm=sign_semi_stable(P, zero_tol),
    )


def solve_equilibrium(s: SSystem, tol_det: float = 1e-12) -> np.ndarray:
    """Just the equilibrium point (the cheap part of `equilibrium`)."""
    ln_x = solve_log_equilibrium(s.G - s.H, np.log(s.beta) - np.log(s.alpha), tol_det)
    with np.errstate(over="ignore"):
        x_eq = np.exp(ln_x)
    if not np.all(np.isfinite(x_eq)):
        raise NonFiniteError("equilibrium overflowed")
    return x_eq


def solve_log_equilibrium(P: np.ndarray, ln_b: np.ndarray, tol_det: float) -> np.ndarray:
    """Solve P ln_x = ln_b, guarding against a numerically singular P."""
    n = P.shape[0]
    det = float(np.linalg.det(P))
    scale = float(np.linalg.norm(P, np.inf)) ** n
    if abs(det) <= tol_det * scale:
        raise DegenerateError(det)
    return np.linalg.solve(P, ln_b)


def jacobian_at_equilibrium(s: SSystem, x_eq) -> np.ndarray:
    """Jacobian of the S-system field at its equilibrium.

    At an equilibrium the production and decay monomials coincide, so
    d f_i / d x_j = (alpha_i / x_j) * prod_k x_k^g_ik * (g_ij - h_ij).
    """
    x_eq = _positive_point(x_eq, s.n)
    gamma = np.exp(np.log(s.alpha) + s.G @ np.log(x_eq))
    return (gamma[:, None] * (s.G - s.H)) / x_eq[None, :]


def eigenvalues(A) -> np.ndarray:
    """Eigenvalues of a real square matrix, sorted by (real, imag).

    Balances, reduces to upper Hessenberg form by Householder
    similarity, then runs implicit double-shift QR with deflation.
    Trailing 1x1/2x2 blocks are resolved in closed form, so e.g. an
    exact double root of a 2x2 integer matrix comes out exact.
    Supports matrices up to 64x64; raises NoConvergenceError if the
    QR iteration stalls.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("matrix must be square")
    if n > MAX_EIG_DIM:
        raise ValueError(f"matrix dimension {n} exceeds supported maximum {MAX_EIG_DIM}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix entries must be finite")
    if n == 0:
        return np.empty(0, dtype=complex)
    H = A.copy()
    _balance(H)
    _hessenberg(H)
    eigs = _hqr(H)
    order = np.lexsort((eigs.imag, eigs.real))
    return eigs[order]


def _balance(A: np.ndarray) -> None:
    """Diagonal similarity scaling, in place, with power-of-two factors.

    Powers of two introduce no rounding, so an already balanced matrix
    passes through bit-identically.
    """
    n = A.shape[0]
    done = False
    while not done:
        done = True
        for i in range(n):
            r = float(np.sum(np.abs(A[i, :]))) - abs(A[i, i])
            c = float(np.sum(np.abs(A[:, i]))) - abs(A[i, i])
            if r == 0.0 or c == 0.0:
                continue
            f = 1.0
            s = c + r
            while c < r / 2.0:
                f *= 2.0
                c *= 4.0
            while c >= r * 2.0:
                f /= 2.0
                c /= 4.0
            if (c + r) / f < 0.95 * s and f != 1.0:
                A[i, :] /= f
                A[:, i] *= f
                done = False


def _hessenberg(A: np.ndarray) -> None:
    """Householder reduction to upper Hessenberg form, in place."""
    n = A.shape[0]
    for k in range(n - 2):
        x = A[k + 1:, k]
        if not np.any(x[1:]):
            continue
        norm = float(np.sqrt(np.dot(x, x)))
        v = x.copy()
        v[0] += math.copysign(norm, x[0])
        v /= float(np.sqrt(np.dot(v, v)))
        # similarity: (I - 2vv^T) A (I - 2vv^T) applied to the trailing block
        A[k + 1:, k:] -= 2.0 * np.outer(v, v @ A[k + 1:, k:])
        A[:, k + 1:] -= 2.0 * np.outer(A[:, k + 1:] @ v, v)
        A[k + 2:, k] = 0.0


def _hqr(H: np.ndarray) -> np.ndarray:
    """All eigenvalues of an upper Hessenberg matrix, modifying it.

    Implicit double-shift QR with the classic safeguards: deflation on
    small subdiagonals, a restart from two consecutive small
    subdiagonals when possible, and an ad-hoc exceptional shift every
    ten stalled sweeps.  The total sweep budget is 30 per eigenvalue.
    """
    n = H.shape[0]
    eps = np.finfo(float).eps
    anorm = float(np.sum(np.abs(H)))
    w = np.empty(n, dtype=complex)
    t = 0.0
    itn = 30 * n
    en = n - 1
    while en >= 0:
        its = 0
        while True:
            # deflation scan: smallest l with a negligible subdiagonal below it
            l = en
            while l > 0:
                s = abs(H[l - 1, l - 1]) + abs(H[l, l])
                if s == 0.0:
                    s = anorm
                if abs(H[l, l - 1]) <= eps * s:
                    H[l, l - 1] = 0.0
                    break
                l -= 1
            na = en - 1
            x = H[en, en]
            if l == en:
                w[en] = complex(x + t)
                en -= 1
                break
            y = H[na, na]
            zw = H[en, na] * H[na, en]
            if l == na:
                # closed-form 2x2: roots of z^2 - (x+y) z + (xy - zw)
                p = 0.5 * (y - x)
                q = p * p + zw
                zz = math.sqrt(abs(q))
                x += t
                if q >= 0.0:
                    zz = p + math.copysign(zz, p)
                    w[na] = complex(x + zz)
                    w[en] = w[na] if zz == 0.0 else complex(x - zw / zz)
                else:
                    w[na] = complex(x + p, zz)
                    w[en] = complex(x + p, -zz)
                en -= 2
                break
            if itn <= 0:
                raise NoConvergenceError(
                    f"eigenvalue QR iteration exhausted its sweep budget at n={n}")
            if its in (10, 20):
                # exceptional shift to break symmetric stalls; the whole
                # remaining window must shift so later deflations see one t
                t += x
                for i in range(en + 1):
                    H[i, i] -= x
                s = abs(H[en, na]) + abs(H[na, en - 2])
                x = 0.75 * s
                y = x
                zw = -0.4375 * s * s
            its += 1
            itn -= 1
            # start the bulge where two consecutive subdiagonals are small
            m = en - 2
            while True:
                zz = H[m, m]
                r = x - zz
                s = y - zz
                p = (r * s - zw) / H[m + 1, m] + H[m, m + 1]
                q = H[m + 1, m + 1] - zz - r - s
                r = H[m + 2, m + 1]
                s = abs(p) + abs(q) + abs(r)
                p /= s
                q /= s
                r /= s
                if m == l:
                    break
                u = abs(H[m, m - 1]) * (abs(q) + abs(r))
                v = abs(p) * (abs(H[m - 1, m - 1]) + abs(zz) + abs(H[m + 1, m + 1]))
                if u <= eps * v:
                    break
                m -= 1
            for i in range(m + 2, en + 1):
                H[i, i - 2] = 0.0
            for i in range(m + 3, en + 1):
                H[i, i - 3] = 0.0
            # double QR sweep on rows l..en, chasing the bulge from m
            for k in range(m, en):
                notlast = k != en - 1
                if k != m:
                    p = H[k, k - 1]
                    q = H[k + 1, k - 1]
                    r = H[k + 2, k - 1] if notlast else 0.0
                    x = abs(p) + abs(q) + abs(r)
                    if x == 0.0:
                        continue
                    p /= x
                    q /= x
                    r /= x
                s = math.copysign(math.sqrt(p * p + q * q + r * r), p)
                if k == m:
                    if l != m:
                        H[k, k - 1] = -H[k, k - 1]
                else:
                    H[k, k - 1] = -s * x
                p += s
                x = p / s
                y = q / s
                zz = r / s
                q /= p
                r /= p
                cols = slice(k, en + 1)
                rows = slice(l, min(en, k + 3) + 1)
                if notlast:
                    pv = H[k, cols] + q * H[k + 1, cols] + r * H[k + 2, cols]
                    H[k, cols] -= pv * x
                    H[k + 1, cols] -= pv * y
                    H[k + 2, cols] -= pv * zz
                    pv = x * H[rows, k] + y * H[rows, k + 1] + zz * H[rows, k + 2]
                    H[rows, k] -= pv
                    H[rows, k + 1] -= pv * q
                    H[rows, k + 2] -= pv * r
                else:
                    pv = H[k, cols] + q * H[k + 1, cols]
                    H[k, cols] -= pv * x
                    H[k + 1, cols] -= pv * y
                    pv = x * H[rows, k] + y * H[rows, k + 1]
                    H[rows, k] -= pv
                    H[rows, k + 1] -= pv * q
    return w


def classify(eigs, tol_hyp: float | None = None) -> str:
    """Hyperbolic classification of a spectrum.

    With threshold t (default 1e-9 scaled by the spectral radius, floor
    1): all real parts < -t is asymptotically stable, any real part > t
    is unstable, anything else is non-hyperbolic.
    """
    eigs = np.atleast_1d(np.asarray(eigs, dtype=complex))
    if tol_hyp is None:
        scale = max(1.0, float(np.max(np.abs(eigs))) if eigs.size else 1.0)
        tol_hyp = 1e-9 * scale
    re = eigs.real
    if np.all(re < -tol_hyp):
        return ASYMPTOTICALLY_STABLE
    if np.any(re > tol_hyp):
        return UNSTABLE
    return NON_HYPERBOLIC


def sign_semi_stable(A, zero_tol: float | None = None) -> SignVerdict:
    """Qualitative (sign-pattern) semi-stability test.

    A real matrix is sign semi-stable iff (i) every diagonal entry is
    <= 0, (ii) opposite off-diagonal entries have product <= 0 and
    (iii) the digraph with an edge i->j wherever A_ij != 0 (i != j) has
    no simple cycle of length >= 3.  Entries within ``zero_tol``
    (default 1e-12 * ||A||_inf) count as zero.  Returns the first
    violated condition with a concrete witness.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("matrix must be square")
    if zero_tol is None:
        zero_tol = 1e-12 * float(np.linalg.norm(A, np.inf))
    S = np.where(np.abs(A) <= zero_tol, 0, np.sign(A)).astype(int)

    for i in range(n):
        if S[i, i] > 0:
            return SignVerdict(False, "i", (i, i))
    for i in range(n):
        for j in range(i + 1, n):
            if S[i, j] * S[j, i] > 0:
                return SignVerdict(False, "ii", (i, j))
    # condition (iii): any simple cycle of length >= 3 in the sign digraph.
    # simple_cycles enumerates lazily, and only O(n^2) 2-cycles can precede
    # the first long cycle, so the early exit is cheap.
    g = nx.DiGraph()
    g.add_nodes_from(range(n))
    g.add_edges_from(
        (i, j) for i in range(n) for j in range(n) if i != j and S[i, j] != 0
    )
    for cyc in nx.simple_cycles(g):
        if len(cyc) >= 3:
            k = cyc.index(min(cyc))
            return SignVerdict(False, "iii", tuple(cyc[k:] + cyc[:k]))
    return SignVerdict(True)


def ssystem_to_dict(s: SSystem) -> dict:
    """Plain-data form used by the JSON serialization (fixed key order)."""
    return {
        "n": s.n,
        "alpha": s.alpha.tolist(),
        "beta": s.beta.tolist(),
        "G": s.G.tolist(),
        "H": s.H.tolist(),
    }


def ssystem_from_dict(d: dict) -> SSystem:
    s = SSystem(alpha=d["alpha"], beta=d["beta"], G=d["G"], H=d["H"])
    if "n" in d and int(d["n"]) != s.n:
        raise ValueError("declared dimension does not match the data")
    return s
