"""Finite-dimensional Lie algebras given by structure constants.

``c[i, j, k]`` is the coefficient of ``e_k`` in ``[e_i, e_j]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ccflow.errors import DimensionError, InvalidAlgebraError
from ccflow.poisson import LIE_POISSON, PoissonStructure

ALGEBRA_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class LieAlgebraSpec:
    """Named basis plus dense structure constants.

    Construction only checks shapes; call :meth:`validate` (done by every
    consumer in this package) to enforce antisymmetry and the Jacobi identity.
    """

    name: str
    basis_names: tuple[str, ...]
    structure_constants: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.structure_constants, dtype=float)
        n = len(self.basis_names)
        if n == 0:
            raise DimensionError("a Lie algebra needs at least one basis element")
        if c.shape != (n, n, n):
            raise DimensionError(f"structure constants must have shape {(n, n, n)}, got {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "basis_names", tuple(self.basis_names))
        object.__setattr__(self, "structure_constants", c)

    @property
    def dim(self) -> int:
        return len(self.basis_names)

    def antisymmetry_residual(self) -> float:
        c = self.structure_constants
        return float(np.max(np.abs(c + c.transpose(1, 0, 2))))

    def jacobi_residual(self) -> float:
        c = self.structure_constants
        # t[i,j,k,l] = sum_m c[i,j,m] c[m,k,l]
        t = np.einsum("ijm,mkl->ijkl", c, c)
        cyc = t + t.transpose(1, 2, 0, 3) + t.transpose(2, 0, 1, 3)
        return float(np.max(np.abs(cyc)))

    def validate(self, tol: float = ALGEBRA_TOL) -> "LieAlgebraSpec":
        anti = self.antisymmetry_residual()
        if anti > tol:
            raise InvalidAlgebraError(f"{self.name}: structure constants not antisymmetric (residual {anti:.3e})")
        jac = self.jacobi_residual()
        if jac > tol:
            raise InvalidAlgebraError(f"{self.name}: Jacobi identity fails (residual {jac:.3e})")
        return self

    def killing_form(self) -> np.ndarray:
        c = self.structure_constants
        return np.einsum("ikl,jlk->ij", c, c)

    def basis_vector(self, name: str) -> np.ndarray:
        e = np.zeros(self.dim)
        e[self.basis_names.index(name)] = 1.0
        return e


def _levi_civita() -> np.ndarray:
    eps = np.zeros((3, 3, 3))
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        eps[i, j, k] = 1.0
        eps[j, i, k] = -1.0
    return eps


def heis3() -> LieAlgebraSpec:
    """Heisenberg algebra: [e1, e2] = e3, e3 central."""
    c = np.zeros((3, 3, 3))
    c[0, 1, 2] = 1.0
    c[1, 0, 2] = -1.0
    return LieAlgebraSpec("heis3", ("e1", "e2", "e3"), c)


def so3() -> LieAlgebraSpec:
    """[e_i, e_j] = eps_ijk e_k."""
    return LieAlgebraSpec("so3", ("e1", "e2", "e3"), _levi_civita())


def e3() -> LieAlgebraSpec:
    """Euclidean motions: rotations e1..e3, translations f1..f3.

    [e_i, e_j] = eps_ijk e_k, [e_i, f_j] = eps_ijk f_k, [f_i, f_j] = 0.
    """
    eps = _levi_civita()
    c = np.zeros((6, 6, 6))
    c[:3, :3, :3] = eps
    c[:3, 3:, 3:] = eps
    c[3:, :3, 3:] = -eps.transpose(1, 0, 2)
    return LieAlgebraSpec("e3", ("e1", "e2", "e3", "f1", "f2", "f3"), c)


ALGEBRAS = {"heis3": heis3, "so3": so3, "e3": e3}


def _check_vec(alg: LieAlgebraSpec, v, what: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (alg.dim,):
        raise DimensionError(f"{what} must have length {alg.dim}, got shape {v.shape}")
    return v


def bracket(alg: LieAlgebraSpec, X, Y) -> np.ndarray:
    X = _check_vec(alg, X, "X")
    Y = _check_vec(alg, Y, "Y")
    return np.einsum("i,j,ijk->k", X, Y, alg.structure_constants)


def ad_star(alg: LieAlgebraSpec, omega, M) -> np.ndarray:
    """Coadjoint action ``N_j = sum_{i,k} c[i,j,k] omega_i M_k``.

    This is ``<ad*_omega M, Y> = <M, [omega, Y]>``; on so(3) it equals the cross
    product ``M x omega``.
    """
    omega = _check_vec(alg, omega, "omega")
    M = _check_vec(alg, M, "M")
    return np.einsum("i,ijk,k->j", omega, alg.structure_constants, M)


def lie_poisson_structure(alg: LieAlgebraSpec, sign: int = 1, coords=None) -> PoissonStructure:
    """Linear structure ``{z_i, z_j}(M) = sign * sum_k c[i,j,k] M_k`` on the dual.

    ``sign=+1`` gives the brackets as written for e(3)* ({m1, m2} = m3).  The
    reduced flows of left-invariant systems, ``dM/dt = ad*_{grad H} M``, are the
    Hamiltonian vector fields of the ``sign=-1`` structure.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    alg.validate()
    c = sign * alg.structure_constants

    def table(M: np.ndarray) -> np.ndarray:
        return c @ M

    names = tuple(coords) if coords is not None else alg.basis_names
    if len(names) != alg.dim:
        raise DimensionError(f"need {alg.dim} coordinate names, got {len(names)}")
    return PoissonStructure(names, table, LIE_POISSON)
