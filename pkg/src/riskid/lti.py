"""Discrete LTI building blocks: rational models, impulse responses, simulation.

Time conventions: data records run t = 1..N and the input is zero for t <= 0,
so the convolution matrix H satisfies H[i, j] = u(i - j + 1) for j <= i
(1-based). Impulse-response coefficients are stored 0-based, g(0) first.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import toeplitz as _toeplitz
from scipy.signal import lfilter

__all__ = [
    "MAGNITUDE_CAP",
    "DivergedResponseError",
    "RationalModel",
    "Dataset",
    "impulse_response",
    "impulse_response_jacobian",
    "build_toeplitz",
    "simulate",
    "sample_white_noise",
    "arx_fit",
    "equation_error_fit",
    "load_model",
    "save_model",
    "load_dataset",
    "save_dataset",
]

# Responses whose magnitude exceeds this cap are treated as diverged so that
# unstable candidate models surface as errors instead of NaN.
MAGNITUDE_CAP = 1e12


class DivergedResponseError(RuntimeError):
    """An impulse response exceeded the configured magnitude cap."""


@dataclass(frozen=True, eq=False)
class RationalModel:
    """Rational transfer function B(q)/F(q) with an input delay of ``nk`` samples.

    Parameters
    ----------
    b : array_like
        Numerator coefficients ``b_0 .. b_nb`` (at least one).
    f : array_like
        Denominator coefficients ``f_1 .. f_nf``; the leading 1 is implied,
        so an empty ``f`` describes an FIR model.
    nk : int
        Nonnegative delay in samples.

    The flat parameter vector is ``[b_0 .. b_nb, f_1 .. f_nf]`` in that exact
    order; :meth:`flatten` and :meth:`unflatten` round-trip it.
    """

    b: np.ndarray
    f: np.ndarray
    nk: int = 0

    def __post_init__(self):
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        f = np.atleast_1d(np.asarray(self.f, dtype=float)) if np.size(self.f) else np.zeros(0)
        if b.ndim != 1 or b.size < 1:
            raise ValueError("b must be a nonempty 1-D coefficient vector")
        if f.ndim != 1:
            raise ValueError("f must be a 1-D coefficient vector")
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(f))):
            raise ValueError("model coefficients must be finite")
        nk = int(self.nk)
        if nk < 0:
            raise ValueError(f"nk must be nonnegative, got {nk}")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "nk", nk)

    @property
    def n_b(self) -> int:
        return self.b.size - 1

    @property
    def n_f(self) -> int:
        return self.f.size

    @property
    def orders(self) -> tuple[int, int, int]:
        return (self.n_b, self.n_f, self.nk)

    @property
    def n_params(self) -> int:
        return self.b.size + self.f.size

    def flatten(self) -> np.ndarray:
        """Flat parameter vector ``[b_0 .. b_nb, f_1 .. f_nf]``."""
        return np.concatenate([self.b, self.f])

    @classmethod
    def unflatten(cls, theta, orders: tuple[int, int, int]) -> "RationalModel":
        """Rebuild a model from a flat parameter vector and ``(n_b, n_f, n_k)``."""
        n_b, n_f, n_k = orders
        theta = np.asarray(theta, dtype=float)
        if theta.size != n_b + 1 + n_f:
            raise ValueError(
                f"parameter vector of length {theta.size} does not match orders {orders}"
            )
        return cls(theta[: n_b + 1], theta[n_b + 1 :], n_k)

    def static_gain(self) -> float:
        """Steady-state gain B(1)/F(1); equals the impulse-response sum for stable models."""
        return float(self.b.sum() / (1.0 + self.f.sum()))

    def denominator(self) -> np.ndarray:
        """Full denominator polynomial ``[1, f_1 .. f_nf]``."""
        return np.concatenate(([1.0], self.f))

    def to_dict(self) -> dict:
        return {"b": self.b.tolist(), "f": self.f.tolist(), "nk": self.nk}

    @classmethod
    def from_dict(cls, data: dict) -> "RationalModel":
        return cls(np.asarray(data["b"], dtype=float), np.asarray(data["f"], dtype=float), int(data["nk"]))


@dataclass(frozen=True, eq=False)
class Dataset:
    """Input/output record of equal length with the convention u(t) = 0 for t <= 0."""

    u: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if u.ndim != 1 or y.ndim != 1:
            raise ValueError("u and y must be 1-D")
        if u.size != y.size or u.size < 1:
            raise ValueError(f"u and y must have equal length >= 1, got {u.size} and {y.size}")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.u.size


def _check_response(g: np.ndarray, cap: float) -> np.ndarray:
    if not np.all(np.isfinite(g)):
        raise DivergedResponseError("impulse response is not finite")
    peak = float(np.abs(g).max(initial=0.0))
    if peak > cap:
        raise DivergedResponseError(
            f"impulse response magnitude {peak:.3e} exceeds cap {cap:.1e}"
        )
    return g


def impulse_response(model: RationalModel, T: int, magnitude_cap: float = MAGNITUDE_CAP) -> np.ndarray:
    """First ``T`` impulse-response coefficients of ``model``.

    Computed by the long-division recursion
    ``g(k) = b_{k-nk} - sum_i f_i g(k-i)`` (b taken as 0 outside its index
    range, g(k) = 0 for k < 0), which is exact for FIR models.

    Raises
    ------
    DivergedResponseError
        If any ``|g(k)|`` exceeds ``magnitude_cap``.
    """
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    num = np.zeros(model.nk + model.b.size)
    num[model.nk :] = model.b
    pulse = np.zeros(T)
    pulse[0] = 1.0
    with np.errstate(over="ignore", invalid="ignore"):
        g = lfilter(num, model.denominator(), pulse)
    return _check_response(g, magnitude_cap)


def impulse_response_jacobian(
    model: RationalModel, T: int, magnitude_cap: float = MAGNITUDE_CAP
) -> np.ndarray:
    """T x n_params matrix of sensitivities dg(k)/dtheta in flat parameter order.

    Differentiating the long-division recursion shows that the sensitivity to
    ``b_m`` is the impulse response of 1/F delayed by ``nk + m``, and the
    sensitivity to ``f_j`` is the (negated) convolution of that response with
    g, delayed by ``j``.
    """
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    n_b, n_f, n_k = model.orders
    pulse = np.zeros(T)
    pulse[0] = 1.0
    den = model.denominator()
    with np.errstate(over="ignore", invalid="ignore"):
        h = lfilter(np.ones(1), den, pulse)
        J = np.zeros((T, model.n_params))
        for m in range(n_b + 1):
            d = n_k + m
            if d < T:
                J[d:, m] = h[: T - d]
        if n_f:
            num = np.zeros(n_k + model.b.size)
            num[n_k:] = model.b
            g = lfilter(num, den, pulse)
            hg = np.convolve(h, g)[:T]
            for j in range(1, n_f + 1):
                if j < T:
                    J[j:, n_b + j] = -hg[: T - j]
    return _check_response(J, magnitude_cap)


def build_toeplitz(u) -> np.ndarray:
    """Lower-triangular Toeplitz convolution matrix with first column ``u``.

    ``H[i, j] = u(i - j + 1)`` for j <= i (1-based indices); H is invertible
    exactly when u(1) != 0.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim != 1 or u.size < 1:
        raise ValueError("u must be a nonempty 1-D vector")
    return _toeplitz(u, np.zeros(u.size))


def simulate(g, u, noise=None) -> np.ndarray:
    """Output ``y = H g + e`` of the system with impulse response ``g``.

    ``g``, ``u`` and ``noise`` (when given) must share one length N; with no
    noise the result is the exact causal convolution of u with g.
    """
    g = np.asarray(g, dtype=float)
    u = np.asarray(u, dtype=float)
    if g.shape != u.shape or g.ndim != 1:
        raise ValueError(f"g and u must be 1-D with equal length, got {g.shape} and {u.shape}")
    y = np.convolve(u, g)[: u.size]
    if noise is not None:
        noise = np.asarray(noise, dtype=float)
        if noise.shape != u.shape:
            raise ValueError(f"noise length {noise.size} does not match N = {u.size}")
        y = y + noise
    return y


def sample_white_noise(n: int, variance: float, seed) -> np.ndarray:
    """``n`` i.i.d. zero-mean Gaussian samples with the given variance.

    Deterministic for a fixed seed; ``seed`` may be an int, a SeedSequence or
    a Generator.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if variance < 0:
        raise ValueError(f"variance must be >= 0, got {variance}")
    rng = np.random.default_rng(seed)
    return np.sqrt(variance) * rng.standard_normal(n)


def arx_fit(u, y, orders: tuple[int, int, int]) -> RationalModel:
    """Equation-error (ARX-style) fit of a rational model by linear least squares.

    Solves ``min_theta sum_t (y(t) + sum_i f_i y(t-i) - sum_m b_m u(t-nk-m))^2``
    with signals taken as zero before the record starts. Biased in noise but
    cheap, deterministic, and a standard starting point for output-error
    refinement.
    """
    n_b, n_f, n_k = orders
    u = np.asarray(u, dtype=float)
    y = np.asarray(y, dtype=float)
    if u.shape != y.shape or u.ndim != 1:
        raise ValueError("u and y must be 1-D with equal length")
    T = y.size
    if T < n_b + 1 + n_f:
        raise ValueError("record too short for the requested orders")
    U = np.zeros((T, n_b + 1))
    for m in range(n_b + 1):
        d = n_k + m
        if d < T:
            U[d:, m] = u[: T - d]
    Y = np.zeros((T, n_f))
    for i in range(1, n_f + 1):
        Y[i:, i - 1] = y[: T - i]
    A = np.hstack([U, -Y])
    theta, *_ = np.linalg.lstsq(A, y, rcond=None)
    return RationalModel.unflatten(theta, orders)


def equation_error_fit(g, orders: tuple[int, int, int]) -> RationalModel:
    """Fit a rational model to an impulse response by linear least squares.

    The impulse-input special case of :func:`arx_fit`: solves the
    linear-in-parameters long-division relation
    ``g(k) + sum_i f_i g(k-i) = b_{k-nk}`` in the least-squares sense. Exact
    when g was produced by a model of the requested orders.
    """
    g = np.asarray(g, dtype=float)
    pulse = np.zeros(g.size)
    if g.size:
        pulse[0] = 1.0
    return arx_fit(pulse, g, orders)


# --- file formats ---------------------------------------------------------


def save_model(model: RationalModel, path) -> None:
    """Write a model as JSON ``{"b": [...], "f": [...], "nk": int}``."""
    Path(path).write_text(json.dumps(model.to_dict(), indent=2) + "\n")


def load_model(path) -> RationalModel:
    """Read a model from its JSON representation."""
    return RationalModel.from_dict(json.loads(Path(path).read_text()))


def save_dataset(dataset: Dataset, path) -> None:
    """Write a dataset as CSV with header ``t,u,y`` and t starting at 1."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "u", "y"])
        for t in range(dataset.n):
            writer.writerow([t + 1, repr(float(dataset.u[t])), repr(float(dataset.y[t]))])


def load_dataset(path) -> Dataset:
    """Read a ``t,u,y`` CSV, tolerating surrounding whitespace in fields."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:3]] != ["t", "u", "y"]:
            raise ValueError(f"{path}: expected header 't,u,y'")
        for row in reader:
            if not row or not "".join(row).strip():
                continue
            rows.append((int(row[0].strip()), float(row[1].strip()), float(row[2].strip())))
    if not rows:
        raise ValueError(f"{path}: no data rows")
    rows.sort(key=lambda r: r[0])
    u = np.array([r[1] for r in rows])
    y = np.array([r[2] for r in rows])
    return Dataset(u, y)
