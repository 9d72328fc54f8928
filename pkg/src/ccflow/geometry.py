"""Carnot-Caratheodory cometrics built from a Riemannian metric and a frame.

The cometric at ``x`` is ``F Q^{-1} F^T`` where ``F`` is the frame matrix
(columns span the distribution) and ``Q = F^T g F`` is the metric restricted to
the distribution.  Only the ``k x k`` matrix ``Q`` is ever inverted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import linalg
from scipy.integrate import trapezoid

from ccflow.errors import DimensionError, InvalidMetricError, SingularFrameError

RANK_RTOL = 1e-10


@dataclass(frozen=True)
class RiemannianMetric:
    """Metric ``g_lower(x)`` (symmetric positive definite ``n x n``).

    ``dg_lower(x)`` may return ``d g_ij / d x_k`` with shape ``(n, n, n)`` indexed
    ``[i, j, k]``; consumers fall back to central differences when it is absent.
    """

    dim: int
    g_lower: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    g_upper: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)
    dg_lower: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)
    label: str = ""

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.g_lower(_point(x, self.dim)), dtype=float)

    def inverse(self, x) -> np.ndarray:
        x = _point(x, self.dim)
        if self.g_upper is not None:
            return np.asarray(self.g_upper(x), dtype=float)
        return np.linalg.inv(self(x))

    def derivative(self, x) -> np.ndarray:
        x = _point(x, self.dim)
        if self.dg_lower is not None:
            return np.asarray(self.dg_lower(x), dtype=float)
        return central_jacobian(self.g_lower, x)


@dataclass(frozen=True)
class DistributionFrame:
    """Rank-``k`` distribution on ``n``-space given by an ``n x k`` frame field."""

    dim: int
    rank: int
    frame: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    label: str = ""

    def __call__(self, x) -> np.ndarray:
        F = np.asarray(self.frame(_point(x, self.dim)), dtype=float)
        if F.shape != (self.dim, self.rank):
            raise DimensionError(f"frame must be {self.dim}x{self.rank}, got {F.shape}")
        return F


@dataclass(frozen=True)
class CCMetricTensor:
    """Degenerate cometric ``g^{ij}(x)`` of rank ``k``."""

    dim: int
    rank: int
    g_upper: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    label: str = ""

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.g_upper(_point(x, self.dim)), dtype=float)


@dataclass(frozen=True)
class AnnihilatorBasis:
    """Covector fields ``omega^(a)(x)`` (rows of an ``(n-k) x n`` matrix) that
    vanish on the distribution.

    ``jacobian(x)`` may return ``d omega_ai / d x_p`` with shape ``(n-k, n, n)``.
    """

    dim: int
    count: int
    covectors: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)

    def __call__(self, x) -> np.ndarray:
        W = np.asarray(self.covectors(_point(x, self.dim)), dtype=float)
        return W.reshape(self.count, self.dim)

    def derivative(self, x) -> np.ndarray:
        x = _point(x, self.dim)
        if self.jacobian is not None:
            return np.asarray(self.jacobian(x), dtype=float)
        return central_jacobian(lambda p: self(p), x)


def _point(x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise DimensionError(f"expected a point of length {n}, got shape {x.shape}")
    return x


def central_jacobian(fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray) -> np.ndarray:
    """Central differences of an array-valued function; derivative axis last.

    Step ``1e-6 * max(1, |x_i|)`` per component.
    """
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        h = 1e-6 * max(1.0, abs(x[i]))
        e = np.zeros_like(x)
        e[i] = h
        cols.append((np.asarray(fn(x + e), dtype=float) - np.asarray(fn(x - e), dtype=float)) / (2 * h))
    return np.stack(cols, axis=-1)


def _frame_rank(F: np.ndarray) -> int:
    s = np.linalg.svd(F, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > RANK_RTOL * s[0]))


def restricted_form(metric: RiemannianMetric, dist: DistributionFrame, x) -> np.ndarray:
    """``Q_x = F^T g F``, the metric restricted to the distribution."""
    F = dist(x)
    return F.T @ metric(x) @ F


def cc_cometric(metric: RiemannianMetric, dist: DistributionFrame) -> CCMetricTensor:
    """Cometric ``g^{ij}`` determined by ``Q_x(Y, g xi) = <Y, xi>`` for ``Y`` in the
    distribution.

    Raises:
        SingularFrameError: the frame loses rank at an evaluation point.
        InvalidMetricError: the restricted form is not positive definite.
    """
    if metric.dim != dist.dim:
        raise DimensionError(f"metric is {metric.dim}-dimensional, frame is {dist.dim}-dimensional")

    def g_upper(x: np.ndarray) -> np.ndarray:
        F = dist(x)
        if _frame_rank(F) < dist.rank:
            raise SingularFrameError(f"frame is rank deficient at x={x.tolist()}")
        Q = F.T @ metric(x) @ F
        try:
            cho = linalg.cho_factor(Q)
        except linalg.LinAlgError as exc:
            raise InvalidMetricError(f"restricted metric not positive definite at x={x.tolist()}") from exc
        G = F @ linalg.cho_solve(cho, F.T)
        return 0.5 * (G + G.T)

    return CCMetricTensor(dist.dim, dist.rank, g_upper, label=dist.label)


def annihilator(dist: DistributionFrame) -> AnnihilatorBasis:
    """Basis of covectors killing the frame, via SVD null space of ``F^T``.

    Rows have unit norm, and the first entry above 1e-10 in magnitude is made
    positive so the output is deterministic.  For a smoothly varying frame this
    basis is smooth only while the null space is one-dimensional.
    """
    n, k = dist.dim, dist.rank

    def covectors(x: np.ndarray) -> np.ndarray:
        F = dist(x)
        if _frame_rank(F) < k:
            raise SingularFrameError(f"frame is rank deficient at x={x.tolist()}")
        if k == n:
            return np.zeros((0, n))
        _, _, vt = np.linalg.svd(F.T)
        W = vt[k:].copy()
        for row in W:
            row /= np.linalg.norm(row)
            lead = np.flatnonzero(np.abs(row) > 1e-10)
            if lead.size and row[lead[0]] < 0:
                row *= -1.0
        return W

    return AnnihilatorBasis(n, n - k, covectors)


def horizontal_velocity(cc: CCMetricTensor, x, xi) -> np.ndarray:
    """Velocity ``g^{ij}(x) xi_j`` of the cotangent lift through ``(x, xi)``."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (cc.dim,):
        raise DimensionError(f"covector must have length {cc.dim}")
    return cc(x) @ xi


def _quadratic_along(xs, xis, cc: CCMetricTensor) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    xis = np.asarray(xis, dtype=float)
    if xs.ndim != 2 or xs.shape != xis.shape:
        raise DimensionError("points and covectors must be arrays of the same (samples, n) shape")
    if xs.shape[0] < 2:
        raise ValueError("at least two samples are needed for quadrature")
    return np.array([xi @ cc(x) @ xi for x, xi in zip(xs, xis)])


def curve_energy(times, xs, xis, cc: CCMetricTensor) -> float:
    """Trapezoidal ``1/2 int <g xi, xi> dt`` along a sampled cotangent lift."""
    q = _quadratic_along(xs, xis, cc)
    return float(0.5 * trapezoid(q, np.asarray(times, dtype=float)))


def curve_length(times, xs, xis, cc: CCMetricTensor) -> float:
    """Trapezoidal ``int sqrt(<g xi, xi>) dt``."""
    q = _quadratic_along(xs, xis, cc)
    return float(trapezoid(np.sqrt(np.maximum(q, 0.0)), np.asarray(times, dtype=float)))
