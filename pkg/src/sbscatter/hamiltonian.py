"""Free, interaction and full (dilated) Hamiltonians on C^2 x Fock.

Spin space is ordered (phi_1, phi_0), so K = diag(e1, 0) and the composite
index of spin s and Fock state i is ``s * D + i`` with D the Fock dimension.
Hence phi_1 x vacuum sits at index 0 and phi_0 x vacuum at index D.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse as sp

from .fock import FockBasis, OperatorMatrix, enumerate_basis, lowering_matrix
from .modes import (DilationParam, FormFactorParams, RadialGrid, dilated_dispersion,
                    effective_coupling)

SIGMA1 = np.array([[0.0, 1.0], [1.0, 0.0]])
UPPER, LOWER = 1, 0  # atomic level labels i in phi_i


@dataclass(frozen=True)
class ModelParams:
    """Physical and numerical parameters of the truncated model."""

    grid: RadialGrid
    e1: float = 1.0
    g: float = 0.1
    form: FormFactorParams = FormFactorParams()
    theta: DilationParam = DilationParam(0.0, 0.15)
    N_max: int = 2
    literal_dilation: bool = False

    def __post_init__(self):
        if not self.e1 > 0:
            raise ValueError("e1 must be > 0")
        if not self.g >= 0:
            raise ValueError("coupling g must be >= 0")
        if int(self.N_max) != self.N_max or self.N_max < 0:
            raise ValueError("N_max must be a non-negative integer")
        object.__setattr__(self, "theta", DilationParam.coerce(self.theta))

    def replace(self, **changes):
        if "theta" in changes:
            changes["theta"] = DilationParam.coerce(changes["theta"])
        return dataclasses.replace(self, **changes)

    @property
    def basis(self) -> FockBasis:
        return enumerate_basis(self.grid.M, int(self.N_max))

    @property
    def dim(self):
        return 2 * self.basis.dim

    def couplings(self, theta=None):
        th = self.theta if theta is None else theta
        return effective_coupling(self.grid, th, self.form, literal=self.literal_dilation)


def level_index(basis: FockBasis, level):
    """Composite index of phi_level x vacuum."""
    if level == UPPER:
        return 0
    if level == LOWER:
        return basis.dim
    raise ValueError("level must be 0 or 1")


def vacuum_state(basis: FockBasis, level):
    v = np.zeros(2 * basis.dim, dtype=complex)
    v[level_index(basis, level)] = 1.0
    return v


def parity_labels(basis: FockBasis):
    """Conserved Z2 label (spin index + boson number) mod 2 for every state."""
    n = basis.number
    return np.concatenate([n % 2, (n + 1) % 2]).astype(np.int8)


def sector_of_level(level):
    """Parity label of the sector containing phi_level x vacuum."""
    return 0 if level == UPPER else 1


def apply_sigma1(x):
    """(sigma_1 x Id) x, which swaps the two spin blocks."""
    x = np.asarray(x)
    half = x.shape[0] // 2
    return np.concatenate([x[half:], x[:half]])


def assemble_free(p: ModelParams, theta=None):
    """K x Id + Id x sum_j omega^theta(r_j) a_j* a_j (diagonal)."""
    th = p.theta if theta is None else DilationParam.coerce(theta)
    basis = p.basis
    hf = basis.energies(dilated_dispersion(th, p.grid.nodes))
    diag = np.concatenate([p.e1 + hf, hf]).astype(complex)
    return OperatorMatrix(sp.diags(diag).tocsr(), hermitian=th.is_real,
                          complex_symmetric=True, parity=parity_labels(basis))


def assemble_interaction(p: ModelParams, theta=None):
    """sigma_1 x sum_j c_j(theta) (a_j + a_j*), without the factor g."""
    th = p.theta if theta is None else DilationParam.coerce(theta)
    basis = p.basis
    low = lowering_matrix(basis, p.couplings(th).astype(complex))
    field = (low + low.T).tocsr()
    mat = sp.kron(sp.csr_matrix(SIGMA1), field, format="csr")
    return OperatorMatrix(mat, hermitian=th.is_real, complex_symmetric=True,
                          parity=parity_labels(basis))


def combine(free: OperatorMatrix, inter: OperatorMatrix, g):
    mat = (free.mat + g * inter.mat).tocsr()
    herm = bool(free.hermitian and inter.hermitian)
    return OperatorMatrix(mat, hermitian=herm, complex_symmetric=True, parity=free.parity)


def assemble_full(p: ModelParams, theta=None):
    """H^theta = H_0^theta + g V^theta."""
    return combine(assemble_free(p, theta), assemble_interaction(p, theta), p.g)


def restrict(op: OperatorMatrix, label):
    """Sub-matrix on one parity sector together with its index set."""
    if op.parity is None:
        raise ValueError("operator carries no parity labels")
    idx = np.flatnonzero(op.parity == label)
    return op.mat[idx][:, idx].tocsc(), idx


def export_matrix_market(op: OperatorMatrix, path, comment=""):
    """Write the operator in Matrix Market coordinate format."""
    scipy.io.mmwrite(str(path), op.mat.tocoo(), comment=comment, field="complex",
                     symmetry="general")


def import_matrix_market(path):
    return sp.csr_matrix(scipy.io.mmread(str(path)))
