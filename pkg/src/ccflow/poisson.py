"""Poisson structures on named coordinates.

A structure is stored as a callable returning the bracket table
``Pi[a, b] = {z_a, z_b}`` at a point.  With that convention the Hamiltonian
vector field is ``dz/dt = Pi(z) @ grad H(z)`` and ``df/dt = {f, H}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from ccflow.errors import DimensionError

CANONICAL = "canonical"
CONSTANT = "constant"
LIE_POISSON = "lie-poisson"
GENERAL = "general"


@dataclass(frozen=True)
class PoissonStructure:
    """Antisymmetric bracket table over an ordered list of coordinates.

    ``kind`` is informational except for ``"canonical"``, where the first half of
    the coordinates are positions and the second half their conjugate momenta.
    """

    coords: tuple[str, ...]
    table: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    kind: str = GENERAL

    @property
    def dim(self) -> int:
        return len(self.coords)

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.shape != (self.dim,):
            raise DimensionError(f"expected a point of length {self.dim}, got shape {z.shape}")
        return self.table(z)

    def index(self, name: str) -> int:
        return self.coords.index(name)

    def bracket_of_coords(self, a: str, b: str, z) -> float:
        return float(self(z)[self.index(a), self.index(b)])

    def antisymmetry_residual(self, z) -> float:
        pi = self(z)
        return float(np.max(np.abs(pi + pi.T)))

    def jacobi_residual(self, z, h: float = 1e-6) -> float:
        """Max over coordinate triples of the cyclic sum {z_a,{z_b,z_c}} + cyclic.

        Derivatives of the table use central differences; for constant and
        linear structures they are exact up to rounding.
        """
        z = np.asarray(z, dtype=float)
        n = self.dim
        pi = self(z)
        if self.kind in (CANONICAL, CONSTANT):
            return 0.0
        dpi = np.empty((n, n, n))
        for d in range(n):
            step = h * max(1.0, abs(z[d]))
            e = np.zeros(n)
            e[d] = step
            dpi[d] = (self.table(z + e) - self.table(z - e)) / (2.0 * step)
        # term[a,b,c] = sum_d Pi[a,d] dPi[d][b,c]
        term = np.einsum("ad,dbc->abc", pi, dpi)
        cyc = term + term.transpose(1, 2, 0) + term.transpose(2, 0, 1)
        return float(np.max(np.abs(cyc)))


def canonical_structure(positions: Sequence[str], momenta: Sequence[str]) -> PoissonStructure:
    """Canonical structure with ``{q_i, p_j} = delta_ij``."""
    n = len(positions)
    if len(momenta) != n:
        raise DimensionError("positions and momenta must have equal length")
    pi = np.zeros((2 * n, 2 * n))
    pi[:n, n:] = np.eye(n)
    pi[n:, :n] = -np.eye(n)
    pi.setflags(write=False)
    return PoissonStructure(tuple(positions) + tuple(momenta), lambda z: pi.copy(), CANONICAL)


def constant_structure(
    coords: Sequence[str], brackets: Mapping[tuple[str, str], float]
) -> PoissonStructure:
    """Constant structure from the upper entries ``{(a, b): value}``; the rest is
    filled in by antisymmetry and unspecified pairs are zero."""
    coords = tuple(coords)
    n = len(coords)
    pi = np.zeros((n, n))
    for (a, b), value in brackets.items():
        i, j = coords.index(a), coords.index(b)
        if i == j:
            raise ValueError(f"diagonal bracket {{{a}, {a}}} must be zero")
        pi[i, j] = value
        pi[j, i] = -value
    pi.setflags(write=False)
    return PoissonStructure(coords, lambda z: pi.copy(), CONSTANT)
