"""Hamiltonian flows on Poisson manifolds: models, brackets, integrators and
first-integral diagnostics.

States are flat float arrays ordered like ``FlowModel.coords``.  For geodesic
flows on the Lagrange multipliers bundle the state is ``(x_1..x_n, lam_1..lam_n)``
and the structure is canonical, ``{x_i, lam_j} = delta_ij``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from ccflow.errors import (
    DimensionError,
    DivergenceError,
    IntegrationError,
    UnsupportedOperationError,
)
from ccflow.geometry import AnnihilatorBasis, CCMetricTensor, RiemannianMetric
from ccflow.poisson import CANONICAL, PoissonStructure, canonical_structure

DEFAULT_BOX = (-2.0, 2.0)
MIDPOINT_TOL = 1e-13
MIDPOINT_MAXITER = 50
METHODS = ("rk4", "implicit_midpoint")

ScalarFn = Callable[[np.ndarray], float]


@dataclass(frozen=True)
class PhaseState:
    """Base point ``x`` and Lagrange multiplier covector ``lam`` (with lam_0 = 1)."""

    x: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).ravel()
        lam = np.asarray(self.lam, dtype=float).ravel()
        if x.shape != lam.shape:
            raise DimensionError(f"x has {x.size} components but lam has {lam.size}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(lam))):
            raise ValueError("phase state components must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "lam", lam)

    @classmethod
    def from_array(cls, z) -> "PhaseState":
        z = np.asarray(z, dtype=float)
        if z.ndim != 1 or z.size % 2:
            raise DimensionError("a phase state array must be 1-D of even length")
        n = z.size // 2
        return cls(z[:n], z[n:])

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.x, self.lam])


@dataclass(frozen=True)
class FlowModel:
    """A named dynamical system.

    ``rhs`` is the hand-derived vector field.  When omitted it is assembled from
    the Hamiltonian as ``Pi(z) grad H(z)``.  Integral functions should accept an
    array of states with coordinates on the last axis.
    """

    name: str
    coords: tuple[str, ...]
    rhs: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)
    poisson: Optional[PoissonStructure] = field(default=None, repr=False)
    hamiltonian: Optional[ScalarFn] = field(default=None, repr=False)
    grad_hamiltonian: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)
    integrals: Mapping[str, ScalarFn] = field(default_factory=dict, repr=False)
    integral_grads: Mapping[str, Callable[[np.ndarray], np.ndarray]] = field(default_factory=dict, repr=False)
    involutive: tuple[str, ...] = ()
    casimirs: tuple[str, ...] = ()
    sample_box: Optional[Sequence[tuple[float, float]]] = field(default=None, repr=False)
    description: str = ""

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(self.coords))
        if self.poisson is not None and self.poisson.coords != self.coords:
            raise DimensionError(f"{self.name}: Poisson coordinates {self.poisson.coords} != {self.coords}")
        missing = [k for k in self.involutive + self.casimirs if k not in self.integrals]
        if missing:
            raise ValueError(f"{self.name}: names {missing} are not declared integrals")

    @property
    def state_dim(self) -> int:
        return len(self.coords)

    def vector_field(self, z: np.ndarray) -> np.ndarray:
        if self.rhs is not None:
            return np.asarray(self.rhs(z), dtype=float)
        return hamilton_rhs(self, z)

    def gradient(self, z: np.ndarray) -> np.ndarray:
        if self.hamiltonian is None:
            raise UnsupportedOperationError(f"model {self.name!r} has no Hamiltonian")
        if self.grad_hamiltonian is not None:
            return np.asarray(self.grad_hamiltonian(z), dtype=float)
        return fd_gradient(self.hamiltonian, z)

    def integral_gradient(self, name: str, z: np.ndarray) -> np.ndarray:
        if name in self.integral_grads:
            return np.asarray(self.integral_grads[name](z), dtype=float)
        return fd_gradient(self.integrals[name], z)

    def sample_states(self, count: int, seed: int) -> np.ndarray:
        """Seeded uniform samples from ``sample_box`` (default [-2, 2] per coordinate)."""
        box = np.array(self.sample_box if self.sample_box is not None else [DEFAULT_BOX] * self.state_dim)
        rng = np.random.default_rng(seed)
        return rng.uniform(box[:, 0], box[:, 1], size=(count, self.state_dim))

    def validate_initial(self, z: np.ndarray) -> None:
        """Hook for models that restrict admissible initial data."""

    def check_state(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.shape != (self.state_dim,):
            raise DimensionError(f"{self.name}: state must have {self.state_dim} components {self.coords}, got shape {z.shape}")
        return z


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    model_name: str
    coords: tuple[str, ...]
    method: str
    dt: float

    def __post_init__(self):
        if self.states.shape != (self.times.size, len(self.coords)):
            raise DimensionError("states must have shape (len(times), len(coords))")
        if self.times.size > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("trajectory times must be strictly increasing")

    def column(self, name: str) -> np.ndarray:
        return self.states[:, self.coords.index(name)]

    def __len__(self) -> int:
        return self.times.size


def fd_gradient(fn: ScalarFn, z) -> np.ndarray:
    """Central differences with step ``1e-6 * max(1, |z_i|)``."""
    z = np.asarray(z, dtype=float)
    g = np.empty_like(z)
    for i in range(z.size):
        h = 1e-6 * max(1.0, abs(z[i]))
        e = np.zeros_like(z)
        e[i] = h
        g[i] = (float(fn(z + e)) - float(fn(z - e))) / (2 * h)
    return g


def cc_hamiltonian(cc: CCMetricTensor) -> Callable[[np.ndarray, np.ndarray], float]:
    """``H(x, lam) = +1/2 g^{ij}(x) lam_i lam_j`` (non-negative convention)."""

    def H(x, lam) -> float:
        lam = np.asarray(lam, dtype=float)
        return 0.5 * float(lam @ cc(x) @ lam)

    return H


def cc_geodesic_model(cc: CCMetricTensor, name: str = "cc-geodesic", position_names: Sequence[str] | None = None) -> FlowModel:
    """Canonical flow of ``cc_hamiltonian(cc)`` on the Lagrange multipliers bundle.

    ``dH/dlam = g lam`` is exact; ``dH/dx`` comes from central differences of the
    cometric.  Use the hand-coded models in :mod:`ccflow.models` when analytic
    derivatives matter.
    """
    n = cc.dim
    q = tuple(position_names) if position_names else tuple(f"x{i + 1}" for i in range(n))
    p = tuple(f"lam{i + 1}" for i in range(n))
    H = cc_hamiltonian(cc)

    def hamiltonian(z):
        return H(z[:n], z[n:])

    def grad(z):
        x, lam = z[:n], z[n:]
        dx = fd_gradient(lambda xx: H(xx, lam), x)
        return np.concatenate([dx, cc(x) @ lam])

    return FlowModel(
        name=name,
        coords=q + p,
        poisson=canonical_structure(q, p),
        hamiltonian=hamiltonian,
        grad_hamiltonian=grad,
        integrals={"H": hamiltonian},
        involutive=("H",),
    )


def hamilton_rhs(model: FlowModel, s) -> np.ndarray:
    """``(dH/dlam, -dH/dx)`` for canonical structures, ``Pi(z) grad H`` otherwise.

    Raises:
        UnsupportedOperationError: the model has no Hamiltonian or no structure.
    """
    z = s.as_array() if isinstance(s, PhaseState) else np.asarray(s, dtype=float)
    if model.hamiltonian is None or model.poisson is None:
        raise UnsupportedOperationError(f"model {model.name!r} is not Hamiltonian")
    z = model.check_state(z)
    grad = model.gradient(z)
    if model.poisson.kind == CANONICAL:
        n = z.size // 2
        return np.concatenate([grad[n:], -grad[:n]])
    return model.poisson(z) @ grad


def poisson_bracket(ps: PoissonStructure, f: ScalarFn, g: ScalarFn, z, df=None, dg=None) -> float:
    """``grad f^T Pi(z) grad g``; ``df``/``dg`` are optional analytic gradients."""
    z = np.asarray(z, dtype=float)
    gf = np.asarray(df(z), dtype=float) if df is not None else fd_gradient(f, z)
    gg = np.asarray(dg(z), dtype=float) if dg is not None else fd_gradient(g, z)
    return float(gf @ ps(z) @ gg)


def coordinate_function(ps: PoissonStructure, name: str) -> tuple[ScalarFn, Callable[[np.ndarray], np.ndarray]]:
    """The coordinate ``name`` as a function together with its (constant) gradient."""
    i = ps.index(name)
    e = np.zeros(ps.dim)
    e[i] = 1.0
    return (lambda z: z[..., i]), (lambda z: e)


def involution_residual(
    model: FlowModel,
    sample_count: int = 100,
    seed: int = 0,
    names: Sequence[str] | None = None,
) -> tuple[tuple[str, ...], np.ndarray]:
    """Pairwise ``max |{I_a, I_b}|`` over seeded samples from the model's box.

    By default every declared integral is included, so the matrix also shows
    non-commuting pairs of super-integrable systems; compare only the
    ``model.involutive`` block against a threshold.
    """
    if model.poisson is None:
        raise UnsupportedOperationError(f"model {model.name!r} has no Poisson structure")
    names = tuple(names) if names is not None else tuple(model.integrals)
    m = len(names)
    out = np.zeros((m, m))
    for z in model.sample_states(sample_count, seed):
        grads = np.array([model.integral_gradient(k, z) for k in names])
        br = grads @ model.poisson(z) @ grads.T
        np.maximum(out, np.abs(br), out=out)
    return names, out


def _rk4_step(f, z, dt):
    k1 = f(z)
    k2 = f(z + 0.5 * dt * k1)
    k3 = f(z + 0.5 * dt * k2)
    k4 = f(z + dt * k3)
    return z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _midpoint_step(f, z, dt, step_index, guess=None, tol=MIDPOINT_TOL, maxiter=MIDPOINT_MAXITER):
    # Fixed-point iteration z1 = z + dt f((z + z1)/2).  The predictor is the
    # caller's guess (previous increment) or an explicit Euler step.
    z1 = z + dt * f(z) if guess is None else guess
    threshold = tol * max(1.0, float(np.abs(z1).max()))
    for _ in range(maxiter):
        z_new = z + dt * f(0.5 * (z + z1))
        delta = float(np.abs(z_new - z1).max())
        z1 = z_new
        if delta <= threshold:
            return z1
        if not np.isfinite(delta):
            raise DivergenceError(f"non-finite state in implicit midpoint solve at step {step_index}", step=step_index)
    raise IntegrationError(
        f"implicit midpoint did not converge to {tol:g} within {maxiter} iterations at step {step_index}",
        step=step_index,
    )


def integrate(model: FlowModel, s0, dt: float, steps: int, method: str = "implicit_midpoint", t0: float = 0.0) -> Trajectory:
    """Fixed-step integration producing ``steps + 1`` states.

    The midpoint rule iterates to a relative increment of 1e-13 (at most 50
    iterations) and preserves quadratic first integrals.

    Raises:
        IntegrationError: midpoint solve failed; ``.step`` names the step.
        DivergenceError: a non-finite state appeared.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    if not dt > 0:
        raise ValueError("dt must be positive")
    steps = int(steps)
    if steps < 0:
        raise ValueError("steps must be non-negative")
    z = model.check_state(s0.as_array() if isinstance(s0, PhaseState) else s0).copy()
    model.validate_initial(z)
    f = model.vector_field
    out = np.empty((steps + 1, z.size))
    out[0] = z
    for n in range(steps):
        if method == "rk4":
            z = _rk4_step(f, z, dt)
        else:
            guess = 2.0 * z - out[n - 1] if n > 0 else None
            z = _midpoint_step(f, z, dt, n + 1, guess)
        if not np.isfinite(z).all():
            raise DivergenceError(f"non-finite state at step {n + 1}", step=n + 1)
        out[n + 1] = z
    times = t0 + dt * np.arange(steps + 1)
    return Trajectory(times, out, model.name, model.coords, method, float(dt))


def evaluate_along(fn: ScalarFn, states: np.ndarray) -> np.ndarray:
    """Evaluate a scalar state function on each row, vectorised when possible."""
    try:
        vals = np.asarray(fn(states), dtype=float)
        if vals.shape == (states.shape[0],):
            return vals
    except Exception:
        pass
    return np.array([float(fn(z)) for z in states])


def drift_report(traj: Trajectory, model: FlowModel) -> dict[str, float]:
    """``max_t |I(t) - I(0)| / max(1, |I(0)|)`` for every declared integral."""
    report = {}
    for name, fn in model.integrals.items():
        vals = evaluate_along(fn, traj.states)
        report[name] = float(np.max(np.abs(vals - vals[0])) / max(1.0, abs(vals[0])))
    return report


def speed_identity_check(traj: Trajectory, metric: RiemannianMetric, cc: CCMetricTensor) -> float:
    """``max_t | g~(xdot, xdot) - 2H |`` with ``xdot = g^{ij} lam_j``."""
    n = metric.dim
    worst = 0.0
    for s in traj.states:
        x, lam = s[:n], s[n : 2 * n]
        G = cc(x)
        xdot = G @ lam
        worst = max(worst, abs(float(xdot @ metric(x) @ xdot) - float(lam @ G @ lam)))
    return worst


def admissibility_residual(traj: Trajectory, constraints: AnnihilatorBasis, cc: CCMetricTensor) -> float:
    """``max_t max_a |<omega^(a)(x), g^{ij} lam_j>|`` along a geodesic trajectory."""
    n = cc.dim
    worst = 0.0
    for s in traj.states:
        x, lam = s[:n], s[n : 2 * n]
        if constraints.count:
            worst = max(worst, float(np.max(np.abs(constraints(x) @ (cc(x) @ lam)))))
    return worst
