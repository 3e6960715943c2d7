"""Diagonal/correlated covariance for impulse-response coefficients and its evidence-based tuning.

The kernel K(i, j) = c * alpha**((i + j) / 2) * rho**|i - j| (1-based i, j)
encodes exponentially decaying coefficients with neighbor correlation. Its
hyperparameters, together with the noise variance, are tuned by maximizing
the Gaussian marginal log-likelihood of the observed outputs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.linalg import cholesky, solve_triangular, toeplitz

from ._threads import single_threaded_blas
from .optimize import minimize_bfgs

__all__ = [
    "DcHyperParams",
    "FactorizationError",
    "dc_kernel",
    "marginal_log_likelihood",
    "marginal_log_likelihood_gradient",
    "tune_hyperparameters",
    "chol_psd",
    "load_hyperparams",
    "save_hyperparams",
]

# Saturation bound keeping transformed coordinates strictly inside the open
# parameter boxes when the optimizer probes extreme points.
_EDGE = 1e-12


class FactorizationError(RuntimeError):
    """Symmetric factorization failed even after jitter escalation."""


@dataclass(frozen=True)
class DcHyperParams:
    """Kernel hyperparameters (scale c, decay alpha, correlation rho) plus noise variance.

    Constraints: c > 0, 0 < alpha < 1 (decaying responses only), |rho| < 1,
    lam > 0.
    """

    c: float
    alpha: float
    rho: float
    lam: float

    def __post_init__(self):
        if not (self.c > 0 and math.isfinite(self.c)):
            raise ValueError(f"c must be positive, got {self.c}")
        if not (0.0 < self.alpha < 1.0):
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not (-1.0 < self.rho < 1.0):
            raise ValueError(f"rho must lie in (-1, 1), got {self.rho}")
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ValueError(f"lam must be positive, got {self.lam}")

    def to_unconstrained(self) -> np.ndarray:
        """Map to (log c, logit alpha, artanh rho, log lam) where the box constraints vanish."""
        return np.array(
            [
                math.log(self.c),
                math.log(self.alpha / (1.0 - self.alpha)),
                math.atanh(self.rho),
                math.log(self.lam),
            ]
        )

    @classmethod
    def from_unconstrained(cls, x) -> "DcHyperParams":
        x = np.clip(np.asarray(x, dtype=float), -700.0, 700.0)
        alpha = 1.0 / (1.0 + math.exp(-x[1]))
        rho = math.tanh(x[2])
        return cls(
            c=math.exp(x[0]),
            alpha=min(max(alpha, _EDGE), 1.0 - _EDGE),
            rho=min(max(rho, -1.0 + _EDGE), 1.0 - _EDGE),
            lam=math.exp(x[3]),
        )

    def to_dict(self) -> dict:
        return {"c": self.c, "alpha": self.alpha, "rho": self.rho, "lambda": self.lam}

    @classmethod
    def from_dict(cls, data: dict) -> "DcHyperParams":
        return cls(
            c=float(data["c"]),
            alpha=float(data["alpha"]),
            rho=float(data["rho"]),
            lam=float(data["lambda"]),
        )


def dc_kernel(params: DcHyperParams, n: int) -> np.ndarray:
    """n x n covariance with K[i, j] = c * alpha**((i+j)/2) * rho**|i-j|, i, j = 1..n.

    Rows/columns index the impulse-response coefficients g(0)..g(n-1) in
    order. Symmetric positive semidefinite for all valid hyperparameters.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    idx = np.arange(1, n + 1)
    v = params.alpha ** (idx / 2.0)
    return params.c * np.outer(v, v) * toeplitz(params.rho ** np.arange(n))


def chol_psd(A: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of a symmetric PSD matrix, with escalating jitter.

    The clean factorization is attempted first; on failure a multiple of the
    identity scaled by trace(A)/n is added, starting at 1e-10 and escalating
    tenfold up to 1e-6 before giving up.

    Raises
    ------
    FactorizationError
        If the factorization still fails at the largest jitter.
    """
    n = A.shape[0]
    try:
        return cholesky(A, lower=True)
    except np.linalg.LinAlgError:
        pass
    scale = float(np.trace(A)) / n
    if not np.isfinite(scale) or scale <= 0.0:
        scale = 1.0
    eye = np.eye(n)
    for eps in (1e-10, 1e-9, 1e-8, 1e-7, 1e-6):
        try:
            return cholesky(A + (eps * scale) * eye, lower=True)
        except np.linalg.LinAlgError:
            continue
    raise FactorizationError(f"Cholesky failed for {n}x{n} matrix after jitter escalation")


def marginal_log_likelihood(params: DcHyperParams, H: np.ndarray, y: np.ndarray) -> float:
    """Gaussian evidence of the outputs with the impulse response integrated out.

    Returns ``-0.5 ln det(lam I + H K H^T) - 0.5 y^T (lam I + H K H^T)^{-1} y``
    computed through a Cholesky factorization (no explicit inverse); the
    constant ``-(N/2) ln 2 pi`` is omitted.
    """
    y = np.asarray(y, dtype=float)
    N = y.size
    if H.shape != (N, N):
        raise ValueError(f"H must be {N}x{N}, got {H.shape}")
    K = dc_kernel(params, N)
    S = H @ K @ H.T
    S = 0.5 * (S + S.T)
    S[np.diag_indices_from(S)] += params.lam
    L = chol_psd(S)
    z = solve_triangular(L, y, lower=True)
    return float(-np.sum(np.log(np.diag(L))) - 0.5 * (z @ z))


def _finite_difference_gradient(fun, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    g = np.zeros_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = h
        g[i] = (fun(x + step) - fun(x - step)) / (2.0 * h)
    return g


def _dc_kernel_derivatives(params: DcHyperParams, n: int):
    """Kernel matrix and its derivatives with respect to (c, alpha, rho)."""
    idx = np.arange(1, n + 1)
    v = params.alpha ** (idx / 2.0)
    A = params.c * np.outer(v, v)
    R = toeplitz(params.rho ** np.arange(n))
    K = A * R
    dK_dc = K / params.c
    half_sums = 0.5 * np.add.outer(idx, idx)
    dK_dalpha = K * half_sums / params.alpha
    lags = np.arange(n)
    dR = toeplitz(np.concatenate(([0.0], lags[1:] * params.rho ** (lags[:-1]))))
    dK_drho = A * dR
    return K, (dK_dc, dK_dalpha, dK_drho)


def marginal_log_likelihood_gradient(
    params: DcHyperParams, H: np.ndarray, y: np.ndarray
) -> tuple[float, np.ndarray]:
    """Marginal log-likelihood and its exact gradient in (c, alpha, rho, lam).

    Uses the standard Gaussian-evidence identity: for S = lam I + H K H^T and
    a = S^{-1} y, the derivative along a perturbation dS of S equals
    ``0.5 (a^T dS a - tr(S^{-1} dS))``.
    """
    y = np.asarray(y, dtype=float)
    N = y.size
    K, dKs = _dc_kernel_derivatives(params, N)
    S = H @ K @ H.T
    S = 0.5 * (S + S.T)
    S[np.diag_indices_from(S)] += params.lam
    L = chol_psd(S)
    z = solve_triangular(L, y, lower=True)
    value = float(-np.sum(np.log(np.diag(L))) - 0.5 * (z @ z))
    a = solve_triangular(L.T, z, lower=False)
    Linv = solve_triangular(L, np.eye(N), lower=True)
    S_inv = Linv.T @ Linv
    Q = H.T @ S_inv @ H  # tr(S^{-1} H dK H^T) = sum(Q * dK)
    w = H.T @ a
    grad = np.empty(4)
    for i, dK in enumerate(dKs):
        grad[i] = 0.5 * (float(w @ (dK @ w)) - float(np.sum(Q * dK)))
    grad[3] = 0.5 * (float(a @ a) - float(np.trace(S_inv)))
    return value, grad


def tune_hyperparameters(
    H: np.ndarray,
    y: np.ndarray,
    init: DcHyperParams,
    *,
    fix_lambda: bool = False,
    restarts: int = 4,
    max_iter: int = 200,
    gtol_rel: float = 1e-5,
    gradient: str = "analytic",
    seed=0,
) -> DcHyperParams:
    """Local maximizer of the marginal log-likelihood, never worse than ``init``.

    The search runs in unconstrained coordinates (log c, logit alpha,
    artanh rho, log lam) so the box constraints hold by construction, using
    quasi-Newton ascent with a backtracking line search. ``gradient`` selects
    exact gradients ("analytic") or central differences ("fd"); both define
    the same maximizer. ``restarts`` perturbed copies of the init are
    searched as well; the best likelihood wins, ties broken by lowest start
    index. ``fix_lambda`` pins the noise variance at its init value instead
    of estimating it.

    Raises
    ------
    ValueError
        If the objective is not finite at ``init``.
    """
    if gradient not in ("analytic", "fd"):
        raise ValueError(f"gradient must be 'analytic' or 'fd', got {gradient!r}")
    y = np.asarray(y, dtype=float)
    x0 = init.to_unconstrained()
    free = np.arange(3 if fix_lambda else 4)

    def params_at(xfree: np.ndarray) -> DcHyperParams:
        x = x0.copy()
        x[free] = xfree
        p = DcHyperParams.from_unconstrained(x)
        return replace(p, lam=init.lam) if fix_lambda else p

    # Single-slot cache: the line search evaluates the accepted point right
    # before its gradient is requested.
    cache: dict = {"key": None, "value": None, "grad": None}

    def evaluate(xfree: np.ndarray) -> None:
        key = xfree.tobytes()
        if cache["key"] == key:
            return
        params = params_at(xfree)
        try:
            value, graw = marginal_log_likelihood_gradient(params, H, y)
        except FactorizationError:
            cache.update(key=key, value=np.inf, grad=np.zeros(free.size))
            return
        # Chain rule into the unconstrained coordinates.
        scale = np.array(
            [
                params.c,
                params.alpha * (1.0 - params.alpha),
                1.0 - params.rho**2,
                params.lam,
            ]
        )
        cache.update(key=key, value=-value, grad=(-graw * scale)[free])

    def neg_ll(xfree: np.ndarray) -> float:
        if gradient == "fd":
            try:
                return -marginal_log_likelihood(params_at(xfree), H, y)
            except FactorizationError:
                return np.inf
        evaluate(xfree)
        return cache["value"]

    if gradient == "fd":
        neg_grad = lambda x: _finite_difference_gradient(neg_ll, x)
    else:

        def neg_grad(xfree: np.ndarray) -> np.ndarray:
            evaluate(xfree)
            return cache["grad"]

    f0 = neg_ll(x0[free])
    if not np.isfinite(f0):
        raise ValueError("marginal log-likelihood is not finite at the initial hyperparameters")

    rng = np.random.default_rng(seed)
    starts = [x0[free]]
    for _ in range(restarts):
        starts.append(x0[free] + rng.standard_normal(free.size))

    best_x, best_f = x0[free], f0
    with single_threaded_blas():
        for x_start in starts:
            res = minimize_bfgs(neg_ll, neg_grad, x_start, max_iter=max_iter, gtol_rel=gtol_rel)
            if np.isfinite(res.fun) and res.fun < best_f:
                best_x, best_f = res.x, res.fun
    return params_at(best_x)


def save_hyperparams(params: DcHyperParams, path) -> None:
    """Write hyperparameters as JSON ``{"c", "alpha", "rho", "lambda"}``."""
    Path(path).write_text(json.dumps(params.to_dict(), indent=2) + "\n")


def load_hyperparams(path) -> DcHyperParams:
    return DcHyperParams.from_dict(json.loads(Path(path).read_text()))
