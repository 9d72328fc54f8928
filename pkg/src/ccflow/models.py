"""Ready-made flows: Heisenberg geodesic flows and their reductions, CC Euler
equations on Lie co-algebras, the heavy rigid body on e(3)*, the G_D
degeneration family and d'Alembert "straight line" flows.

Heisenberg coordinates identify the group element
``[[1, x, z], [0, 1, y], [0, 0, 1]]`` with ``(x, y, z)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ccflow.errors import (
    ConstraintDegeneracyError,
    ConstraintError,
    CoordinateSingularityError,
    DimensionError,
    InvalidMetricError,
)
from ccflow.geometry import (
    AnnihilatorBasis,
    CCMetricTensor,
    DistributionFrame,
    RiemannianMetric,
)
from ccflow.hamiltonian import FlowModel, integrate
from ccflow.lie import LieAlgebraSpec, e3, lie_poisson_structure, so3
from ccflow.poisson import GENERAL, PoissonStructure, canonical_structure, constant_structure

HEIS_POSITIONS = ("x", "y", "z")
HEIS_MULTIPLIERS = ("lam1", "lam2", "lam3")
POLAR_MIN_RADIUS = 1e-6
ADMISSIBLE_TOL = 1e-12


# --- Heisenberg group geometry -------------------------------------------------


def heisenberg_metric() -> RiemannianMetric:
    """Left-invariant metric with orthonormal e1, e2, e3 at the identity."""

    def g(p):
        x = p[0]
        return np.array([[1.0, 0.0, 0.0], [0.0, 1.0 + x * x, -x], [0.0, -x, 1.0]])

    def g_inv(p):
        x = p[0]
        return np.array([[1.0, 0.0, 0.0], [0.0, 1.0, x], [0.0, x, 1.0 + x * x]])

    def dg(p):
        x = p[0]
        d = np.zeros((3, 3, 3))
        d[1, 1, 0] = 2.0 * x
        d[1, 2, 0] = d[2, 1, 0] = -1.0
        return d

    return RiemannianMetric(3, g, g_upper=g_inv, dg_lower=dg, label="heisenberg-left-invariant")


def heisenberg_left_frame() -> DistributionFrame:
    """Left translates of span{e1, e2}: columns (1, 0, 0) and (0, 1, x)."""
    return DistributionFrame(
        3, 2, lambda p: np.array([[1.0, 0.0], [0.0, 1.0], [0.0, p[0]]]), label="heisenberg-left"
    )


def heisenberg_right_frame() -> DistributionFrame:
    """Right translates of span{e1, e2}: columns (1, 0, y) and (0, 1, 0)."""
    return DistributionFrame(
        3, 2, lambda p: np.array([[1.0, 0.0], [0.0, 1.0], [p[1], 0.0]]), label="heisenberg-right"
    )


def heisenberg_left_cometric() -> CCMetricTensor:
    """Closed form ``[[1, 0, 0], [0, 1, x], [0, x, x^2]]``."""

    def G(p):
        x = p[0]
        return np.array([[1.0, 0.0, 0.0], [0.0, 1.0, x], [0.0, x, x * x]])

    return CCMetricTensor(3, 2, G, label="heisenberg-left")


def heisenberg_right_cometric() -> CCMetricTensor:
    """Closed form of the right-distribution cometric, with ``V = 1/(1+x^2+y^2)``."""

    def G(p):
        x, y = p[0], p[1]
        V = 1.0 / (1.0 + x * x + y * y)
        a, b = 1.0 + x * x, 1.0 + y * y
        return V * np.array(
            [
                [a, x * y, y * a],
                [x * y, b, x * y * y],
                [y * a, x * y * y, y * y * a],
            ]
        )

    return CCMetricTensor(3, 2, G, label="heisenberg-right")


def heisenberg_left_annihilator() -> AnnihilatorBasis:
    """``dz - x dy``."""

    def jac(p):
        d = np.zeros((1, 3, 3))
        d[0, 1, 0] = -1.0
        return d

    return AnnihilatorBasis(3, 1, lambda p: np.array([[0.0, -p[0], 1.0]]), jacobian=jac)


def heisenberg_right_annihilator() -> AnnihilatorBasis:
    """``dz - y dx``."""

    def jac(p):
        d = np.zeros((1, 3, 3))
        d[0, 0, 1] = -1.0
        return d

    return AnnihilatorBasis(3, 1, lambda p: np.array([[-p[1], 0.0, 1.0]]), jacobian=jac)


@dataclass(frozen=True)
class GeodesicModel(FlowModel):
    """Canonical CC geodesic flow that remembers its geometric data."""

    metric: Optional[RiemannianMetric] = field(default=None, repr=False)
    cometric: Optional[CCMetricTensor] = field(default=None, repr=False)
    constraints: Optional[AnnihilatorBasis] = field(default=None, repr=False)


def heisenberg_left_model() -> GeodesicModel:
    """Geodesic flow of the left-invariant CC metric on the Heisenberg group.

    ``H = (lam1^2 + lam2^2 + x^2 lam3^2 + 2 x lam2 lam3) / 2`` with integrals
    ``I1 = H``, ``I2 = lam2``, ``I3 = lam3`` (pairwise in involution) and the extra
    ``I4 = lam3 y + lam1``.
    """

    def H(z):
        x, a, b, c = z[..., 0], z[..., 3], z[..., 4], z[..., 5]
        w = b + x * c
        return 0.5 * (a * a + w * w)

    def grad(z):
        x, a, b, c = z[0], z[3], z[4], z[5]
        w = b + x * c
        return np.array([c * w, 0.0, 0.0, a, w, x * w])

    def rhs(z):
        x, _, _, a, b, c = z.tolist()
        w = b + x * c
        return np.array([a, w, x * w, -c * w, 0.0, 0.0])

    e4, e5 = np.eye(6)[4], np.eye(6)[5]
    return GeodesicModel(
        name="heisenberg-left",
        coords=HEIS_POSITIONS + HEIS_MULTIPLIERS,
        rhs=rhs,
        poisson=canonical_structure(HEIS_POSITIONS, HEIS_MULTIPLIERS),
        hamiltonian=H,
        grad_hamiltonian=grad,
        integrals={
            "I1": H,
            "I2": lambda z: z[..., 4],
            "I3": lambda z: z[..., 5],
            "I4": lambda z: z[..., 5] * z[..., 1] + z[..., 3],
        },
        integral_grads={
            "I1": grad,
            "I2": lambda z: e4,
            "I3": lambda z: e5,
            "I4": lambda z: np.array([0.0, z[5], 0.0, 1.0, 0.0, z[1]]),
        },
        involutive=("I1", "I2", "I3"),
        description="left-invariant metric, left-invariant distribution",
        metric=heisenberg_metric(),
        cometric=heisenberg_left_cometric(),
        constraints=heisenberg_left_annihilator(),
    )


def _right_parts(x, y, u, v):
    # H = N / (2D) in terms of u = lam1 + y lam3 and v = lam2.
    D = 1.0 + x * x + y * y
    N = (1.0 + x * x) * u * u + 2.0 * x * y * u * v + (1.0 + y * y) * v * v
    H = 0.5 * N / D
    Hu = ((1.0 + x * x) * u + x * y * v) / D
    Hv = (x * y * u + (1.0 + y * y) * v) / D
    return D, H, Hu, Hv


def heisenberg_right_model() -> GeodesicModel:
    """Geodesic flow for the left-invariant metric and right-invariant distribution.

    Integrals ``I1 = H``, ``I2 = lam3`` and
    ``I3 = lam3 (x^2 - y^2)/2 + x lam2 - y lam1``, pairwise in involution.
    """

    def H(z):
        x, y, a, b, c = z[..., 0], z[..., 1], z[..., 3], z[..., 4], z[..., 5]
        return _right_parts(x, y, a + y * c, b)[1]

    def grad(z):
        x, y, _, a, b, c = z.tolist()
        u = a + y * c
        D, h, Hu, Hv = _right_parts(x, y, u, b)
        # partials at fixed (lam1, lam2, lam3); u depends on y through y*lam3
        Hx = (x * u * u + y * b * u) / D - 2.0 * x * h / D
        Hy = ((1.0 + x * x) * u * c + x * b * u + x * y * b * c + y * b * b) / D - 2.0 * y * h / D
        return np.array([Hx, Hy, 0.0, Hu, Hv, y * Hu])

    def rhs(z):
        g = grad(z)
        return np.array([g[3], g[4], g[5], -g[0], -g[1], 0.0])

    def I3(z):
        x, y, a, b, c = z[..., 0], z[..., 1], z[..., 3], z[..., 4], z[..., 5]
        return c * (x * x - y * y) / 2.0 + x * b - y * a

    def dI3(z):
        x, y, a, b, c = z[0], z[1], z[3], z[4], z[5]
        return np.array([c * x + b, -c * y - a, 0.0, -y, x, (x * x - y * y) / 2.0])

    e5 = np.eye(6)[5]
    return GeodesicModel(
        name="heisenberg-right",
        coords=HEIS_POSITIONS + HEIS_MULTIPLIERS,
        rhs=rhs,
        poisson=canonical_structure(HEIS_POSITIONS, HEIS_MULTIPLIERS),
        hamiltonian=H,
        grad_hamiltonian=grad,
        integrals={"I1": H, "I2": lambda z: z[..., 5], "I3": I3},
        integral_grads={"I1": grad, "I2": lambda z: e5, "I3": dI3},
        involutive=("I1", "I2", "I3"),
        description="left-invariant metric, right-invariant distribution",
        metric=heisenberg_metric(),
        cometric=heisenberg_right_cometric(),
        constraints=heisenberg_right_annihilator(),
    )


# --- reductions to the level set lam3 = C --------------------------------------


@dataclass(frozen=True)
class ReducedModel(FlowModel):
    """Flow on the 4-dimensional level set ``lam3 = C`` with a twisted structure."""

    C: float = 0.0
    side: str = ""


def project_left(states, C: Optional[float] = None) -> np.ndarray:
    """Map full left states to ``(x, y, u, v) = (x, y, lam1, lam2 + x lam3)``.

    ``C`` replaces ``lam3`` when given.
    """
    s = np.asarray(states, dtype=float)
    c = s[..., 5] if C is None else C
    return np.stack([s[..., 0], s[..., 1], s[..., 3], s[..., 4] + s[..., 0] * c], axis=-1)


def project_right(states, C: Optional[float] = None) -> np.ndarray:
    """Map full right states to ``(x, y, u, v) = (x, y, lam1 + y lam3, lam2)``."""
    s = np.asarray(states, dtype=float)
    c = s[..., 5] if C is None else C
    return np.stack([s[..., 0], s[..., 1], s[..., 3] + s[..., 1] * c, s[..., 4]], axis=-1)


def reduce_heisenberg(side: str, C: float) -> ReducedModel:
    """Reduced flow on ``(x, y, u, v)`` at ``lam3 = C``.

    left: ``{x,u} = {y,v} = 1``, ``{u,v} = -C``, ``H = (u^2 + v^2)/2``, integrals
    ``I2 = C x - v`` and ``I3 = C y + u``.
    right: ``{u,v} = +C``, the reduced Hamiltonian of the right model, integral
    ``I2 = C (x^2 + y^2)/2 + x v - y u``.
    """
    C = float(C)
    coords = ("x", "y", "u", "v")
    if side == "left":
        poisson = constant_structure(coords, {("x", "u"): 1.0, ("y", "v"): 1.0, ("u", "v"): -C})

        def H(z):
            return 0.5 * (z[..., 2] ** 2 + z[..., 3] ** 2)

        def grad(z):
            return np.array([0.0, 0.0, z[2], z[3]])

        def rhs(z):
            _, _, u, v = z.tolist()
            return np.array([u, v, -C * v, C * u])

        return ReducedModel(
            name=f"reduced-left(C={C:g})",
            coords=coords,
            rhs=rhs,
            poisson=poisson,
            hamiltonian=H,
            grad_hamiltonian=grad,
            integrals={"H": H, "I2": lambda z: C * z[..., 0] - z[..., 3], "I3": lambda z: C * z[..., 1] + z[..., 2]},
            integral_grads={
                "H": grad,
                "I2": lambda z: np.array([C, 0.0, 0.0, -1.0]),
                "I3": lambda z: np.array([0.0, C, 1.0, 0.0]),
            },
            involutive=("H", "I2"),
            description="charged particle in a constant magnetic field",
            C=C,
            side="left",
        )
    if side == "right":
        poisson = constant_structure(coords, {("x", "u"): 1.0, ("y", "v"): 1.0, ("u", "v"): C})

        def H(z):
            return _right_parts(z[..., 0], z[..., 1], z[..., 2], z[..., 3])[1]

        def grad(z):
            x, y, u, v = z.tolist()
            D, h, Hu, Hv = _right_parts(x, y, u, v)
            Hx = (x * u * u + y * u * v) / D - 2.0 * x * h / D
            Hy = (x * u * v + y * v * v) / D - 2.0 * y * h / D
            return np.array([Hx, Hy, Hu, Hv])

        def rhs(z):
            Hx, Hy, Hu, Hv = grad(z)
            return np.array([Hu, Hv, -Hx + C * Hv, -Hy - C * Hu])

        def I2(z):
            x, y, u, v = z[..., 0], z[..., 1], z[..., 2], z[..., 3]
            return C * (x * x + y * y) / 2.0 + x * v - y * u

        def dI2(z):
            x, y, u, v = z
            return np.array([C * x + v, C * y - u, -y, x])

        return ReducedModel(
            name=f"reduced-right(C={C:g})",
            coords=coords,
            rhs=rhs,
            poisson=poisson,
            hamiltonian=H,
            grad_hamiltonian=grad,
            integrals={"H": H, "I2": I2},
            integral_grads={"H": grad, "I2": dI2},
            involutive=("H", "I2"),
            description="charged particle on the plane with metric (1+y^2)dx^2 - 2xy dxdy + (1+x^2)dy^2",
            C=C,
            side="right",
        )
    raise ValueError(f"side must be 'left' or 'right', got {side!r}")


def _check_radius(r):
    if np.any(np.asarray(r) < POLAR_MIN_RADIUS):
        raise CoordinateSingularityError(f"polar coordinates are singular for r < {POLAR_MIN_RADIUS:g} (r={np.min(r):.3e})")


def reduce_right_polar(C: float) -> ReducedModel:
    """Right reduced flow in polar coordinates ``(r, phi, p_r, p_phi)``.

    ``H = (p_r^2 + p_phi^2 / (r^2 + r^4)) / 2``.  The structure is
    ``{r, p_r} = {phi, p_phi} = 1`` and ``{p_r, p_phi} = C r``: the Cartesian
    twist ``C dx^dy`` equals ``C r dr^dphi``.  ``I2 = p_phi + C r^2 / 2``.
    """
    C = float(C)
    coords = ("r", "phi", "p_r", "p_phi")

    def table(z):
        r = z[0]
        _check_radius(r)
        return np.array(
            [
                [0.0, 0.0, 1.0, 0.0],
                [0.0, 0.0, 0.0, 1.0],
                [-1.0, 0.0, 0.0, C * r],
                [0.0, -1.0, -C * r, 0.0],
            ]
        )

    def H(z):
        r, pr, pphi = z[..., 0], z[..., 2], z[..., 3]
        _check_radius(r)
        return 0.5 * (pr * pr + pphi * pphi / (r * r + r**4))

    def grad(z):
        r, _, pr, pphi = z.tolist()
        _check_radius(r)
        s = r * r + r**4
        return np.array([-pphi * pphi * (r + 2.0 * r**3) / (s * s), 0.0, pr, pphi / s])

    def rhs(z):
        Hr, _, Hpr, Hpphi = grad(z)
        r = float(z[0])
        return np.array([Hpr, Hpphi, -Hr + C * r * Hpphi, -C * r * Hpr])

    return ReducedModel(
        name=f"reduced-right-polar(C={C:g})",
        coords=coords,
        rhs=rhs,
        poisson=PoissonStructure(coords, table, GENERAL),
        hamiltonian=H,
        grad_hamiltonian=grad,
        integrals={"H": H, "I2": lambda z: z[..., 3] + C * z[..., 0] ** 2 / 2.0},
        integral_grads={"H": grad, "I2": lambda z: np.array([C * z[0], 0.0, 0.0, 1.0])},
        involutive=("H", "I2"),
        sample_box=[(0.5, 2.0), (-np.pi, np.pi), (-2.0, 2.0), (-2.0, 2.0)],
        description="right reduced flow, polar coordinates",
        C=C,
        side="right-polar",
    )


def cartesian_to_polar(states) -> np.ndarray:
    """``(x, y, u, v) -> (r, phi, p_r, p_phi)`` (cotangent lift of the polar map)."""
    s = np.asarray(states, dtype=float)
    x, y, u, v = s[..., 0], s[..., 1], s[..., 2], s[..., 3]
    r = np.hypot(x, y)
    _check_radius(r)
    return np.stack([r, np.arctan2(y, x), (x * u + y * v) / r, x * v - y * u], axis=-1)


def polar_to_cartesian(states) -> np.ndarray:
    s = np.asarray(states, dtype=float)
    r, phi, pr, pphi = s[..., 0], s[..., 1], s[..., 2], s[..., 3]
    c, sn = np.cos(phi), np.sin(phi)
    return np.stack([r * c, r * sn, c * pr - sn * pphi / r, sn * pr + c * pphi / r], axis=-1)


# --- closed-form oracle ---------------------------------------------------------


@dataclass(frozen=True)
class MagneticCircle:
    """Exact solution of the left reduced flow for ``C != 0``.

    Velocity ``(u, v)`` turns at rate ``C`` (counter-clockwise for ``C > 0``);
    the orbit is a circle of radius ``sqrt(2E)/|C|``.
    """

    energy: float
    C: float
    x0: float
    y0: float
    heading: float

    @property
    def speed(self) -> float:
        return float(np.sqrt(2.0 * self.energy))

    @property
    def radius(self) -> float:
        return self.speed / abs(self.C)

    @property
    def angular_frequency(self) -> float:
        return abs(self.C)

    @property
    def period(self) -> float:
        return 2.0 * np.pi / abs(self.C)

    @property
    def center(self) -> np.ndarray:
        k = self.speed / self.C
        return np.array([self.x0 - k * np.sin(self.heading), self.y0 + k * np.cos(self.heading)])

    def initial_state(self) -> np.ndarray:
        s = self.speed
        return np.array([self.x0, self.y0, s * np.cos(self.heading), s * np.sin(self.heading)])

    def states(self, t) -> np.ndarray:
        """``(x, y, u, v)`` at the given times, shape ``(len(t), 4)``."""
        t = np.asarray(t, dtype=float)
        s, C, th = self.speed, self.C, self.heading
        ang = C * t + th
        k = s / C
        return np.stack(
            [
                self.x0 + k * (np.sin(ang) - np.sin(th)),
                self.y0 - k * (np.cos(ang) - np.cos(th)),
                s * np.cos(ang),
                s * np.sin(ang),
            ],
            axis=-1,
        )


def magnetic_circle_oracle(E: float, C: float, start: Sequence[float] = (0.0, 0.0, 0.0)) -> MagneticCircle:
    """Closed-form orbit with energy ``E`` from ``start = (x, y, heading)``."""
    if not E > 0:
        raise ValueError("oracle needs E > 0")
    if C == 0:
        raise ValueError("oracle undefined for C = 0 (the motion is a straight line)")
    x0, y0, heading = (float(v) for v in start)
    return MagneticCircle(float(E), float(C), x0, y0, heading)


# --- Euler equations on Lie co-algebras -----------------------------------------


@dataclass(frozen=True)
class EulerModel:
    """Scalar product ``J`` on the algebra and the generating subspace ``G0``
    spanned by the basis vectors ``subspace_indices``."""

    alg: LieAlgebraSpec
    J: np.ndarray
    subspace_indices: tuple[int, ...]

    def __post_init__(self):
        J = np.array(self.J, dtype=float)
        n = self.alg.dim
        if J.shape != (n, n):
            raise DimensionError(f"J must be {n}x{n}")
        if not np.allclose(J, J.T, atol=1e-14):
            raise InvalidMetricError("J must be symmetric")
        if np.min(np.linalg.eigvalsh(J)) <= 0:
            raise InvalidMetricError("J must be positive definite")
        idx = tuple(int(i) for i in self.subspace_indices)
        if not idx or len(set(idx)) != len(idx) or min(idx) < 0 or max(idx) >= n:
            raise DimensionError(f"subspace indices {idx} out of range for dimension {n}")
        J.setflags(write=False)
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "subspace_indices", idx)

    @property
    def basis(self) -> np.ndarray:
        return np.eye(self.alg.dim)[:, list(self.subspace_indices)]

    @property
    def omega_map(self) -> np.ndarray:
        """``K`` with ``omega(M) = K M``: the element of G0 with ``J(omega, y) = <M, y>``
        for all ``y`` in G0."""
        B = self.basis
        return B @ np.linalg.solve(B.T @ self.J @ B, B.T)

    @property
    def J0(self) -> np.ndarray:
        """Degenerate form equal to ``J`` on G0 and vanishing on its J-orthogonal complement."""
        B = self.basis
        JB = self.J @ B
        return JB @ np.linalg.solve(B.T @ JB, JB.T)

    def omega(self, M) -> np.ndarray:
        return self.omega_map @ np.asarray(M, dtype=float)


def cc_euler_model(em: EulerModel, name: Optional[str] = None) -> FlowModel:
    """``dM/dt = ad*_omega M`` with ``omega = omega(M)`` and ``H = <M, omega>/2``.

    Declared integrals: ``H`` (half of ``<J0 omega, omega>``) and, when the Killing
    form ``K`` is non-degenerate, the Casimir ``M^T (-K/2)^{-1} M`` which on so(3)
    is ``|M|^2``.
    """
    alg = em.alg.validate()
    K = em.omega_map
    coords = tuple(f"M{i + 1}" for i in range(alg.dim))

    def H(M):
        return 0.5 * np.einsum("...i,ij,...j->...", M, K, M)

    def grad(M):
        return K @ M

    # dM_j/dt = sum_{i,k} c[i,j,k] omega_i M_k with omega = K M, contracted once here
    A = np.einsum("ijk,il->jkl", alg.structure_constants, K)

    def rhs(M):
        return (A @ M) @ M

    integrals = {"H": H}
    grads = {"H": grad}
    killing = alg.killing_form()
    if abs(np.linalg.det(killing)) > 1e-12:
        Q = np.linalg.inv(-0.5 * killing)
        integrals["casimir"] = lambda M: np.einsum("...i,ij,...j->...", M, Q, M)
        grads["casimir"] = lambda M: 2.0 * (Q @ M)
    return FlowModel(
        name=name or f"cc-euler-{alg.name}",
        coords=coords,
        rhs=rhs,
        poisson=lie_poisson_structure(alg, sign=-1, coords=coords),
        hamiltonian=H,
        grad_hamiltonian=grad,
        integrals=integrals,
        integral_grads=grads,
        involutive=tuple(integrals),
        casimirs=tuple(k for k in integrals if k == "casimir"),
        description=f"Euler equations on {alg.name}*, G0 = {list(em.subspace_indices)}",
    )


def so3_cc_euler_model() -> FlowModel:
    """so(3), ``J = identity``, ``G0 = span{e1, e2}``: ``omega = (M1, M2, 0)``."""
    return cc_euler_model(EulerModel(so3(), np.eye(3), (0, 1)), name="so3-cc-euler")


def gd_degeneration_pair(D: float) -> tuple[FlowModel, FlowModel]:
    """Riemannian Euler flow for ``G_D = diag(1, 1, D)`` and its CC limit.

    The first has ``omega_D = (M1, M2, M3/D)``, the second ``omega = (M1, M2, 0)``.
    """
    D = float(D)
    if not D > 0:
        raise ValueError(f"D must be positive, got {D}")
    riemannian = cc_euler_model(EulerModel(so3(), np.diag([1.0, 1.0, D]), (0, 1, 2)), name=f"gd-euler(D={D:g})")
    return riemannian, so3_cc_euler_model()


@dataclass(frozen=True)
class DegenerationRow:
    D: float
    gap: float


def degeneration_sweep(
    Ds: Sequence[float], M0=(1.0, 1.0, 1.0), T: float = 5.0, dt: float = 1e-3, method: str = "implicit_midpoint"
) -> tuple[list[DegenerationRow], Optional[bool]]:
    """Sup-norm gap between each ``G_D`` trajectory and the CC trajectory.

    Returns the rows and a strict-decrease flag (``None`` for fewer than two D).
    """
    if len(Ds) == 0:
        raise ValueError("need at least one value of D")
    pairs = [gd_degeneration_pair(D) for D in Ds]
    steps = int(round(T / dt))
    limit = integrate(pairs[0][1], np.asarray(M0, dtype=float), dt, steps, method)
    rows = []
    for D, (riem, _) in zip(Ds, pairs):
        tr = integrate(riem, np.asarray(M0, dtype=float), dt, steps, method)
        rows.append(DegenerationRow(float(D), float(np.max(np.abs(tr.states - limit.states)))))
    if len(rows) < 2:
        return rows, None
    return rows, all(b.gap < a.gap for a, b in zip(rows, rows[1:]))


# --- heavy rigid body on e(3)* ------------------------------------------------


@dataclass(frozen=True)
class RigidBodyParams:
    """``inertia`` maps angular momentum to angular velocity; ``r`` is the centre
    of mass in the body frame."""

    inertia: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        inertia = np.array(self.inertia, dtype=float)
        r = np.array(self.r, dtype=float)
        if inertia.shape != (3, 3) or r.shape != (3,):
            raise DimensionError("inertia must be 3x3 and r a 3-vector")
        if not np.allclose(inertia, inertia.T, atol=1e-14) or np.min(np.linalg.eigvalsh(inertia)) <= 0:
            raise InvalidMetricError("inertia must be symmetric positive definite")
        inertia.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "inertia", inertia)
        object.__setattr__(self, "r", r)


def random_rigid_body(rng: np.random.Generator) -> RigidBodyParams:
    """Inertia ``A A^T / 3 + I/2`` with ``A`` uniform in [-1, 1]; ``r`` uniform in [-1, 1]."""
    A = rng.uniform(-1.0, 1.0, size=(3, 3))
    inertia = A @ A.T / 3.0 + 0.5 * np.eye(3)
    return RigidBodyParams(0.5 * (inertia + inertia.T), rng.uniform(-1.0, 1.0, size=3))


def rigid_body_e3_model(p: RigidBodyParams) -> FlowModel:
    """``H = (I m, m)/2 + (r, gamma)``; ``dm/dt = m x omega + gamma x r``,
    ``dgamma/dt = gamma x omega`` with ``omega = I m``.

    Casimirs ``<gamma, gamma>`` and ``<m, gamma>`` are declared with ``H``.
    """
    inertia, r = p.inertia, p.r
    r_list = r.tolist()
    coords = ("m1", "m2", "m3", "g1", "g2", "g3")

    def H(z):
        m, g = z[..., :3], z[..., 3:]
        return 0.5 * np.einsum("...i,ij,...j->...", m, inertia, m) + g @ r

    def grad(z):
        return np.concatenate([inertia @ z[:3], r])

    def rhs(z):
        m1, m2, m3, g1, g2, g3 = z.tolist()
        w1, w2, w3 = (inertia @ z[:3]).tolist()
        r1, r2, r3 = r_list
        return np.array(
            [
                m2 * w3 - m3 * w2 + g2 * r3 - g3 * r2,
                m3 * w1 - m1 * w3 + g3 * r1 - g1 * r3,
                m1 * w2 - m2 * w1 + g1 * r2 - g2 * r1,
                g2 * w3 - g3 * w2,
                g3 * w1 - g1 * w3,
                g1 * w2 - g2 * w1,
            ]
        )

    return FlowModel(
        name="rigid-body-e3",
        coords=coords,
        rhs=rhs,
        poisson=lie_poisson_structure(e3(), sign=-1, coords=coords),
        hamiltonian=H,
        grad_hamiltonian=grad,
        integrals={
            "H": H,
            "gamma_sq": lambda z: np.sum(z[..., 3:] ** 2, axis=-1),
            "m_dot_gamma": lambda z: np.sum(z[..., :3] * z[..., 3:], axis=-1),
        },
        integral_grads={
            "H": grad,
            "gamma_sq": lambda z: np.concatenate([np.zeros(3), 2.0 * z[3:]]),
            "m_dot_gamma": lambda z: np.concatenate([z[3:], z[:3]]),
        },
        involutive=("H", "gamma_sq", "m_dot_gamma"),
        casimirs=("gamma_sq", "m_dot_gamma"),
        description="heavy rigid body with a fixed point",
    )


# --- d'Alembert "straight line" flows -------------------------------------------


@dataclass(frozen=True)
class ConstrainedLagrangianModel(FlowModel):
    """Second-order flow on ``(x, xdot)`` with reaction forces ``sum mu_a omega^(a)``."""

    metric: Optional[RiemannianMetric] = field(default=None, repr=False)
    constraints: Optional[AnnihilatorBasis] = field(default=None, repr=False)

    def split(self, z):
        n = self.metric.dim
        z = np.asarray(z, dtype=float)
        return z[:n], z[n:]

    def _forces(self, z):
        x, v = self.split(z)
        g = self.metric(x)
        dg = self.metric.derivative(x)
        # kinetic terms from d/dt dL/dxdot - dL/dx with L = g(xdot, xdot)/2
        c = np.einsum("iqp,p,q->i", dg, v, v) - 0.5 * np.einsum("pqi,p,q->i", dg, v, v)
        return x, v, g, c

    def multipliers(self, z) -> np.ndarray:
        x, v, g, c = self._forces(z)
        return self._solve_mu(x, v, g, c)

    def _solve_mu(self, x, v, g, c):
        W = self.constraints(x)
        if W.shape[0] == 0:
            return np.zeros(0)
        dW = self.constraints.derivative(x)
        ginv_c = np.linalg.solve(g, c)
        ginv_Wt = np.linalg.solve(g, W.T)
        gram = W @ ginv_Wt
        if np.linalg.cond(gram) > 1e12:
            raise ConstraintDegeneracyError(f"constraint Gram matrix singular at x={x.tolist()}")
        wdot_v = np.einsum("aip,p,i->a", dW, v, v)
        return np.linalg.solve(gram, W @ ginv_c - wdot_v)

    def acceleration(self, z) -> np.ndarray:
        x, v, g, c = self._forces(z)
        mu = self._solve_mu(x, v, g, c)
        W = self.constraints(x)
        return np.linalg.solve(g, W.T @ mu - c)

    def vector_field(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return np.concatenate([z[self.metric.dim :], self.acceleration(z)])

    def validate_initial(self, z) -> None:
        viol = self.constraint_violation(z)
        if viol > ADMISSIBLE_TOL:
            raise ConstraintError(f"initial velocity violates the constraints by {viol:.3e}", violation=viol)

    def project_velocity(self, z) -> np.ndarray:
        """Replace the velocity by its Euclidean projection onto the constraint kernel."""
        x, v = self.split(z)
        W = self.constraints(x)
        if W.shape[0]:
            v = v - W.T @ np.linalg.solve(W @ W.T, W @ v)
        return np.concatenate([x, v])

    def constraint_violation(self, z) -> float:
        x, v = self.split(z)
        W = self.constraints(x)
        return float(np.max(np.abs(W @ v))) if W.shape[0] else 0.0


def dalembert_model(
    metric: RiemannianMetric,
    constraints: AnnihilatorBasis,
    name: str = "dalembert",
    position_names: Optional[Sequence[str]] = None,
) -> ConstrainedLagrangianModel:
    """Equations ``d/dt dL/dxdot - dL/dx = sum_a mu_a omega^(a)`` with
    ``<omega^(a), xdot> = 0``.

    The multipliers solve ``(W g^-1 W^T) mu = W g^-1 c - (dW/dt) xdot``, obtained
    by differentiating the constraints once in time; ``c`` collects the
    velocity-quadratic terms.  Initial velocities violating the constraints by
    more than 1e-12 are rejected.
    """
    if metric.dim != constraints.dim:
        raise DimensionError("metric and constraints live on different spaces")
    n = metric.dim
    q = tuple(position_names) if position_names else tuple(f"x{i + 1}" for i in range(n))
    coords = q + tuple(f"d{name_}" for name_ in q)

    def kinetic(z):
        x, v = z[:n], z[n:]
        return 0.5 * float(v @ metric(x) @ v)

    return ConstrainedLagrangianModel(
        name=name,
        coords=coords,
        integrals={"kinetic_energy": kinetic},
        description="d'Alembert straight-line flow",
        metric=metric,
        constraints=constraints,
    )


def euclidean_metric(n: int) -> RiemannianMetric:
    eye = np.eye(n)
    zero = np.zeros((n, n, n))
    return RiemannianMetric(n, lambda x: eye, g_upper=lambda x: eye, dg_lower=lambda x: zero, label="euclidean")


def heisenberg_dalembert_model() -> ConstrainedLagrangianModel:
    """Euclidean 3-space with the constraint ``dz - x dy = 0``; ``mu = xdot ydot/(1+x^2)``."""
    return dalembert_model(euclidean_metric(3), heisenberg_left_annihilator(), "dalembert-heisenberg", HEIS_POSITIONS)
