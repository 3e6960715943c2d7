"""Quasi-Newton minimizer with Armijo backtracking, shared by the tuner and the decision search."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["BfgsResult", "minimize_bfgs"]


@dataclass(frozen=True)
class BfgsResult:
    x: np.ndarray
    fun: float
    grad_norm: float
    n_iter: int
    converged: bool
    status: str  # "converged" | "max_iter" | "line_search_failed"


def minimize_bfgs(
    fun,
    grad,
    x0,
    max_iter: int = 500,
    gtol_rel: float = 1e-8,
    armijo: float = 1e-4,
    backtrack: float = 0.5,
    step_min: float = 1e-14,
) -> BfgsResult:
    """Minimize ``fun`` from ``x0`` using BFGS with a backtracking line search.

    Stops when the gradient infinity-norm drops below
    ``gtol_rel * (1 + |fun|)``, after ``max_iter`` iterations, or when the
    line search cannot make progress. Accepted iterates have strictly
    non-increasing objective values (Armijo condition), and non-finite trial
    values simply shrink the step.
    """
    # Extreme trial points can overflow intermediate products; every such
    # value is checked for finiteness before use, so the warnings are noise.
    with np.errstate(over="ignore", invalid="ignore"):
        return _minimize_bfgs(fun, grad, x0, max_iter, gtol_rel, armijo, backtrack, step_min)


def _minimize_bfgs(fun, grad, x0, max_iter, gtol_rel, armijo, backtrack, step_min) -> BfgsResult:
    x = np.asarray(x0, dtype=float).copy()
    f = float(fun(x))
    g = np.asarray(grad(x), dtype=float)
    n = x.size
    H = np.eye(n)
    first_update = True
    status = "max_iter"
    it = 0
    for it in range(max_iter):
        gnorm = float(np.abs(g).max(initial=0.0))
        if gnorm <= gtol_rel * (1.0 + abs(f)):
            status = "converged"
            break
        p = -H @ g
        slope = float(g @ p)
        fresh_direction = first_update
        if not np.isfinite(slope) or slope >= 0.0:
            # Reset a corrupted curvature model and fall back to steepest descent.
            H = np.eye(n)
            first_update = True
            fresh_direction = True
            p = -g
            slope = float(g @ p)
        if not np.isfinite(slope):
            status = "line_search_failed"
            break
        t = 1.0
        if fresh_direction:
            # Without curvature information the direction magnitude is
            # arbitrary; cap the first trial step so huge gradients do not
            # have to backtrack from astronomically far trial points.
            pnorm = float(np.abs(p).max(initial=0.0))
            t = min(1.0, (1.0 + float(np.abs(x).max(initial=0.0))) / max(pnorm, 1.0))
        xnorm = float(np.abs(x).max(initial=0.0))
        pnorm = float(np.abs(p).max(initial=0.0))
        while True:
            f_new = float(fun(x + t * p))
            if np.isfinite(f_new) and f_new <= f + armijo * t * slope:
                break
            t *= backtrack
            if t * pnorm < step_min * (1.0 + xnorm):
                f_new = None
                break
        if f_new is None:
            status = "line_search_failed"
            break
        x_new = x + t * p
        g_new = np.asarray(grad(x_new), dtype=float)
        s = x_new - x
        yv = g_new - g
        sy = float(s @ yv)
        if sy > 1e-12 * max(1.0, float(np.linalg.norm(s)) * float(np.linalg.norm(yv))):
            if first_update:
                H = (sy / float(yv @ yv)) * np.eye(n)
                first_update = False
            rho = 1.0 / sy
            Hy = H @ yv
            H = H - rho * (np.outer(s, Hy) + np.outer(Hy, s)) + rho * (rho * float(yv @ Hy) + 1.0) * np.outer(s, s)
        x, f, g = x_new, f_new, g_new
    else:
        it = max_iter
    gnorm = float(np.abs(g).max(initial=0.0))
    if status == "max_iter" and gnorm <= gtol_rel * (1.0 + abs(f)):
        status = "converged"
    return BfgsResult(x=x, fun=f, grad_norm=gnorm, n_iter=it, converged=status == "converged", status=status)
