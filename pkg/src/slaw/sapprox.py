"""Tangent power-law approximation and the fixed-point equilibrium solver.

At a positive point x0 each production/decay term v(x) is replaced by
the power law that matches its value and all first partials there:

    g_ij = x0_j * (d v_plus_i / d x_j)(x0) / v_plus_i(x0)
    alpha_i = v_plus_i(x0) * prod_j x0_j^(-g_ij)

(and the same for the decay side, giving h and beta).  The resulting
S-system is the S-approximation of the field at x0.  The map Psi sends
x0 to the equilibrium of that S-system; fixed points of Psi are exactly
the equilibria of the original field, and the Jacobian of Psi vanishes
at them, so iterating Psi converges superlinearly once it gets close.

`find_equilibrium` drives the iteration: stop when the infinity-norm
step falls below eps (absolute by default, relative on request) and the
field residual at the final point is at most eps_res; report degenerate
exponent matrices, terms leaving the positive domain, divergence, and
iteration-budget exhaustion as distinct statuses instead of guessing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateError, NonFiniteError, NonPositiveFieldError
from .field import SplitField
from .ssystem import SSystem, solve_log_equilibrium, ssystem_to_dict

__all__ = [
    "SApproximation",
    "IterationReport",
    "CONVERGED",
    "DEGENERATE",
    "NON_POSITIVE_FIELD",
    "DIVERGED",
    "MAX_ITER",
    "s_approximate",
    "psi_step",
    "find_equilibrium",
    "psi_jacobian_fd",
]

CONVERGED = "converged"
DEGENERATE = "degenerate"
NON_POSITIVE_FIELD = "non-positive-field"
DIVERGED = "diverged"
MAX_ITER = "max-iter"

# |ln x| beyond this is within one Psi step of IEEE-double overflow
LOG_DIVERGENCE_LIMIT = 700.0


@dataclass(frozen=True)
class SApproximation:
    """An S-system tangent to a split field at the point x0."""

    x0: np.ndarray
    ssystem: SSystem


def _approx_parts(f: SplitField, x: np.ndarray):
    """Log-space pieces of the S-approximation at x: (G, H, ln_alpha, ln_beta)."""
    vp, vm = f.eval_split(x)
    dp, dm = f.partials(x)
    ln_x = np.log(x)
    G = (x[None, :] * dp) / vp[:, None]
    H = (x[None, :] * dm) / vm[:, None]
    ln_alpha = np.log(vp) - G @ ln_x
    ln_beta = np.log(vm) - H @ ln_x
    if not (np.all(np.isfinite(G)) and np.all(np.isfinite(H))
            and np.all(np.isfinite(ln_alpha)) and np.all(np.isfinite(ln_beta))):
        raise NonFiniteError("power-law approximation overflowed")
    return G, H, ln_alpha, ln_beta


def s_approximate(f: SplitField, x0) -> SApproximation:
    """Tangent S-system of a split field at the positive point x0."""
    x0 = np.asarray(x0, dtype=float)
    G, H, ln_alpha, ln_beta = _approx_parts(f, x0)
    with np.errstate(over="ignore"):
        alpha = np.exp(ln_alpha)
        beta = np.exp(ln_beta)
    if not (np.all(np.isfinite(alpha)) and np.all(np.isfinite(beta))):
        raise NonFiniteError("power-law rate overflowed")
    return SApproximation(x0=x0, ssystem=SSystem(alpha=alpha, beta=beta, G=G, H=H))


def _psi_log(f: SplitField, x: np.ndarray, tol_det: float) -> np.ndarray:
    """ln of Psi(x): log-space equilibrium of the S-approximation at x."""
    G, H, ln_alpha, ln_beta = _approx_parts(f, x)
    return solve_log_equilibrium(G - H, ln_beta - ln_alpha, tol_det)


def psi_step(f: SplitField, x, tol_det: float = 1e-12) -> np.ndarray:
    """One step of the iteration: the equilibrium of the S-approximation at x."""
    x = np.asarray(x, dtype=float)
    ln_next = _psi_log(f, x, tol_det)
    with np.errstate(over="ignore"):
        out = np.exp(ln_next)
    if not np.all(np.isfinite(out)):
        raise NonFiniteError("Psi step overflowed")
    return out


@dataclass
class IterationReport:
    """Trace and outcome of a `find_equilibrium` run.

    ``iterates`` holds x^0 .. x^q (all strictly positive); ``steps`` is
    the number of Psi applications, q.  ``ssystem`` is the
    S-approximation at the final iterate when it exists there (for a
    converged run, the local surrogate at the equilibrium).  ``residual``
    is the field residual ||v_plus - v_minus||_inf at the final iterate,
    None when the field cannot be evaluated there.
    """

    status: str
    iterates: list[np.ndarray]
    ssystem: SSystem | None
    residual: float | None
    steps: int
    message: str = ""
    step_ssystems: list[SSystem] | None = field(default=None, repr=False)

    @property
    def x(self) -> np.ndarray:
        """Final iterate."""
        return self.iterates[-1]

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "steps": self.steps,
            "iterates": [list(map(float, it)) for it in self.iterates],
            "residual": None if self.residual is None else float(self.residual),
            "ssystem": None if self.ssystem is None else ssystem_to_dict(self.ssystem),
        }


def find_equilibrium(f: SplitField, x0, eps: float = 1e-5, max_iter: int = 50, *,
                     tol_det: float = 1e-12, eps_res: float | None = None,
                     relative: bool = False, keep_ssystems: bool = False) -> IterationReport:
    """Iterate Psi from x0 until the step shrinks below eps.

    The stopping test is ||x_new - x||_inf < eps (multiplied by
    1 + ||x_new||_inf when ``relative``); a candidate stop must also
    pass the residual check ||v_plus - v_minus||_inf <= eps_res
    (default 100 * eps) so a slow plateau is not mistaken for an
    equilibrium.  A degenerate exponent matrix, a term leaving the
    positive domain, and divergence (non-finite values or
    ||ln x||_inf > 700) all terminate with their own status.
    """
    if eps <= 0.0 or max_iter < 1:
        raise ValueError("eps must be positive and max_iter at least 1")
    if eps_res is None:
        eps_res = 100.0 * eps
    x = np.asarray(x0, dtype=float)
    if x.shape != (f.n,):
        raise ValueError(f"expected a point with {f.n} components, got shape {x.shape}")
    if not np.all(np.isfinite(x)) or np.any(x <= 0.0):
        raise ValueError("starting point must be strictly positive and finite")

    iterates = [x.copy()]
    trace: list[SSystem] | None = [] if keep_ssystems else None
    status = MAX_ITER
    message = ""
    for _ in range(max_iter):
        try:
            if keep_ssystems:
                approx = s_approximate(f, x)
                trace.append(approx.ssystem)
                s = approx.ssystem
                ln_next = solve_log_equilibrium(
                    s.G - s.H, np.log(s.beta) - np.log(s.alpha), tol_det)
            else:
                ln_next = _psi_log(f, x, tol_det)
        except DegenerateError as exc:
            status = DEGENERATE
            message = str(exc)
            break
        except NonPositiveFieldError as exc:
            status = NON_POSITIVE_FIELD
            message = str(exc)
            break
        except NonFiniteError as exc:
            status = DIVERGED
            message = str(exc)
            break
        if np.max(np.abs(ln_next)) > LOG_DIVERGENCE_LIMIT:
            status = DIVERGED
            message = "iterate left the representable range"
            break
        x_new = np.exp(ln_next)
        if not np.all(np.isfinite(x_new)):
            status = DIVERGED
            message = "iterate overflowed"
            break
        step = float(np.max(np.abs(x_new - x)))
        iterates.append(x_new)
        x = x_new
        threshold = eps * (1.0 + float(np.max(np.abs(x_new)))) if relative else eps
        if step < threshold:
            try:
                vp, vm = f.eval_split(x)
            except NonPositiveFieldError as exc:
                status = NON_POSITIVE_FIELD
                message = str(exc)
                break
            except NonFiniteError as exc:
                status = DIVERGED
                message = str(exc)
                break
            res = float(np.max(np.abs(vp - vm)))
            if res <= eps_res:
                status = CONVERGED
                break
            # plateau: the step test fired but the point is no equilibrium

    residual: float | None = None
    ssys: SSystem | None = None
    try:
        vp, vm = f.eval_split(iterates[-1])
        residual = float(np.max(np.abs(vp - vm)))
        ssys = s_approximate(f, iterates[-1]).ssystem
    except (NonPositiveFieldError, NonFiniteError):
        # the final point is outside the field's domain of validity;
        # fall back to the last approximation that existed, if any
        if trace:
            ssys = trace[-1]
    return IterationReport(
        status=status,
        iterates=iterates,
        ssystem=ssys,
        residual=residual,
        steps=len(iterates) - 1,
        message=message,
        step_ssystems=trace,
    )


def psi_jacobian_fd(f: SplitField, x, h: float = 1e-5, tol_det: float = 1e-12) -> np.ndarray:
    """Central finite-difference Jacobian of Psi at x.

    At an equilibrium of the field this is a numerical zero, which is
    what makes the iteration superlinear there.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    J = np.empty((n, n))
    for j in range(n):
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        J[:, j] = (psi_step(f, xp, tol_det) - psi_step(f, xm, tol_det)) / (2.0 * h)
    return J
