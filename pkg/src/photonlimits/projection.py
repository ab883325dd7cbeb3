"""Restrict Fourier vectors to wavepackets with every cavity state initially empty.

alpha_gj(0) = 0 is the linear condition sum_n f_n^(1->j) C_n = 0, one per
channel.  An orthonormal basis of the complement of those conditions is the
projected space the optimizer works in.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import SystemParams
from .spectral import FourierBasis, conversion_factors

DEGENERACY_TOL = 1e-9


class DegeneracyError(ValueError):
    pass


def _mgs(vectors, start=(), tol=DEGENERACY_TOL):
    """Modified Gram-Schmidt with one reorthogonalization pass.

    Returns the orthonormalized survivors of ``vectors`` (appended after the
    already-orthonormal ``start``) and the relative residual norm of each
    candidate.
    """
    basis = [np.asarray(q) for q in start]
    residuals = []
    for v in vectors:
        v = np.array(v, dtype=complex)
        norm0 = np.linalg.norm(v)
        for _ in range(2):
            for q in basis:
                v -= (q.conj() @ v) * q
        r = np.linalg.norm(v) / norm0 if norm0 > 0 else 0.0
        residuals.append(r)
        if r > tol:
            basis.append(v / np.linalg.norm(v))
    return basis[len(start):], residuals


def constraint_vectors(basis: FourierBasis, params: SystemParams,
                       tol: float = DEGENERACY_TOL) -> list[np.ndarray]:
    """phi_j with phi_j^dag C = sqrt(T_b) alpha_gj(0); degenerate channels collapsed."""
    f = conversion_factors(basis, params)
    kept: list[np.ndarray] = []
    ortho: list[np.ndarray] = []
    for fj in f:
        phi = fj.conj()
        new, _ = _mgs([phi], start=ortho, tol=tol)
        if new:
            kept.append(phi)
            ortho.extend(new)
    return kept


@dataclass(frozen=True)
class ProjectionData:
    constraint_vectors: tuple[np.ndarray, ...]
    U: np.ndarray
    j_M_d: int

    @property
    def dim(self) -> int:
        return self.U.shape[0]

    @property
    def projected_dim(self) -> int:
        return self.dim - self.j_M_d

    @property
    def Q(self) -> np.ndarray:
        """Columns span the projected space: Q = (Pi U)^dag."""
        return self.U[: self.projected_dim].conj().T

    def project(self, v: np.ndarray) -> np.ndarray:
        """Pi U v."""
        return (self.U @ v)[: self.projected_dim]

    def lift(self, w: np.ndarray) -> np.ndarray:
        """U^dag Pi~ w, back to Fourier coefficients."""
        return self.Q @ w

    def reverse(self, w: np.ndarray) -> np.ndarray:
        """Pi~ w: append j_M_d zeros."""
        return np.concatenate([w, np.zeros(self.j_M_d, dtype=complex)])


def build_projection(vectors, basis: FourierBasis) -> ProjectionData:
    vectors = [np.asarray(v, dtype=complex) for v in vectors]
    n = basis.size
    if any(v.shape != (n,) for v in vectors):
        raise ValueError(f"constraint vectors must have length {n}")
    cons, residuals = _mgs(vectors)
    if len(cons) < len(vectors):
        worst = min(residuals)
        raise DegeneracyError(
            f"constraint vectors are linearly dependent (relative residual {worst:.2e}); "
            "collapse degenerate channels before projecting"
        )
    # complete to a full orthonormal basis from the standard basis
    rest, _ = _mgs(np.eye(n), start=cons, tol=1e-6)
    rest = rest[: n - len(cons)]
    rows = [q.conj() for q in rest] + [q.conj() for q in cons]
    U = np.array(rows)
    return ProjectionData(tuple(vectors), U, len(cons))


def projection_for(basis: FourierBasis, params: SystemParams) -> ProjectionData:
    return build_projection(constraint_vectors(basis, params), basis)


def project_matrix(P: np.ndarray, proj: ProjectionData) -> np.ndarray:
    """Pi U P U^dag Pi~."""
    P = np.asarray(P)
    if P.shape != (proj.dim, proj.dim):
        raise ValueError(f"matrix shape {P.shape} does not match basis size {proj.dim}")
    Q = proj.Q
    out = Q.conj().T @ P @ Q
    return 0.5 * (out + out.conj().T)
