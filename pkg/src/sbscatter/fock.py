"""Truncated bosonic Fock space and ladder operators.

The truncation keeps every occupation vector with total boson number at most
``N_max``.  States are ordered by total number first and lexicographically
(on the sorted tuple of occupied modes) inside each number sector, so state 0
is always the vacuum.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg  # noqa: F401  (sp.linalg.norm)

MAX_FOCK_DIM = 400_000


class DimensionError(ValueError):
    """Raised when a requested truncation exceeds the dimension guard."""


def fock_dimension(M, N_max):
    return sum(comb(M + n - 1, n) for n in range(N_max + 1))


@dataclass(frozen=True, eq=False)
class FockBasis:
    """Occupation-number basis with sum(n_j) <= N_max."""

    M: int
    N_max: int
    modes: tuple  # per state: sorted tuple of occupied mode indices, with repeats
    index: dict = field(repr=False)

    @property
    def dim(self):
        return len(self.modes)

    def __len__(self):
        return len(self.modes)

    @property
    def states(self):
        """Occupation vectors as an integer array of shape (dim, M)."""
        occ = np.zeros((self.dim, self.M), dtype=np.int16)
        for i, m in enumerate(self.modes):
            for j in m:
                occ[i, j] += 1
        return occ

    @property
    def number(self):
        """Total boson number of each basis state."""
        return np.fromiter((len(m) for m in self.modes), dtype=np.int64, count=self.dim)

    def occupation(self, i):
        occ = [0] * self.M
        for j in self.modes[i]:
            occ[j] += 1
        return tuple(occ)

    def index_of(self, occupation):
        occupation = tuple(int(n) for n in occupation)
        if len(occupation) != self.M:
            raise ValueError("occupation vector has wrong length")
        key = tuple(j for j, n in enumerate(occupation) for _ in range(n))
        return self.index[key]

    def energies(self, omega):
        """sum_j n_j omega_j for every state (omega may be complex)."""
        omega = np.asarray(omega)
        out = np.zeros(self.dim, dtype=np.result_type(omega, float))
        for i, m in enumerate(self.modes):
            if m:
                out[i] = omega[list(m)].sum()
        return out


@lru_cache(maxsize=16)
def enumerate_basis(M, N_max, max_dim=MAX_FOCK_DIM):
    """Build the graded-lexicographic basis for M modes and cap N_max."""
    if M < 1 or N_max < 0:
        raise ValueError("need M >= 1 and N_max >= 0")
    dim = fock_dimension(M, N_max)
    if dim > max_dim:
        raise DimensionError(
            f"Fock dimension {dim} for M={M}, N_max={N_max} exceeds the guard {max_dim}")
    modes = []
    for n in range(N_max + 1):
        modes.extend(itertools.combinations_with_replacement(range(M), n))
    index = {m: i for i, m in enumerate(modes)}
    return FockBasis(M, N_max, tuple(modes), index)


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Sparse complex operator with optional structural flags.

    ``parity`` optionally labels each basis vector with a conserved Z2
    quantum number; solvers use it to split the problem into sectors.
    """

    mat: sp.csr_matrix
    hermitian: bool | None = None
    complex_symmetric: bool | None = None
    parity: np.ndarray | None = field(default=None, repr=False)

    @property
    def dim(self):
        return self.mat.shape[0]

    @property
    def shape(self):
        return self.mat.shape

    def __matmul__(self, x):
        return self.mat @ x

    def toarray(self):
        return self.mat.toarray()

    def conj(self):
        return OperatorMatrix(self.mat.conj().tocsr(), self.hermitian,
                              self.complex_symmetric, self.parity)

    def adjoint(self):
        return OperatorMatrix(self.mat.conj().T.tocsr(), self.hermitian,
                              self.complex_symmetric, self.parity)

    def symmetry_defects(self):
        """Max-abs deviations from Hermiticity and complex symmetry."""
        a = self.mat
        herm = abs(a - a.conj().T).max() if a.nnz else 0.0
        sym = abs(a - a.T).max() if a.nnz else 0.0
        return float(herm), float(sym)

    def check_flags(self, tol=1e-14):
        herm, sym = self.symmetry_defects()
        scale = max(1.0, abs(self.mat).max() if self.mat.nnz else 0.0)
        ok = True
        if self.hermitian is not None:
            ok &= (herm <= tol * scale) == bool(self.hermitian)
        if self.complex_symmetric is not None:
            ok &= (sym <= tol * scale) == bool(self.complex_symmetric)
        return bool(ok)


def lowering_matrix(basis: FockBasis, coeffs):
    """Sparse matrix of sum_j coeffs[j] a_j (rows: states with one boson fewer)."""
    coeffs = np.asarray(coeffs)
    if coeffs.shape != (basis.M,):
        raise ValueError(f"need {basis.M} mode coefficients")
    rows, cols, vals = [], [], []
    index = basis.index
    for i, m in enumerate(basis.modes):
        if not m:
            continue
        prev = None
        for pos, j in enumerate(m):
            if j == prev:
                continue
            prev = j
            nj = m.count(j)
            lower = m[:pos] + m[pos + 1:]
            rows.append(index[lower])
            cols.append(i)
            vals.append(coeffs[j] * np.sqrt(nj))
    dtype = np.result_type(coeffs.dtype, float)
    return sp.csr_matrix((np.asarray(vals, dtype=dtype), (rows, cols)),
                         shape=(basis.dim, basis.dim))


def mode_annihilator(basis: FockBasis, j):
    """a_j for mode index ``j`` (0-based)."""
    if not 0 <= j < basis.M:
        raise IndexError(f"mode index {j} out of range 0..{basis.M - 1}")
    e = np.zeros(basis.M)
    e[j] = 1.0
    return OperatorMatrix(lowering_matrix(basis, e), hermitian=False)


def mode_creator(basis: FockBasis, j):
    return mode_annihilator(basis, j).adjoint()


def smeared_annihilator(basis: FockBasis, h):
    """a(h) = sum_j conj(h_j) a_j, antilinear in h."""
    h = np.asarray(h, dtype=complex)
    return OperatorMatrix(lowering_matrix(basis, h.conj()), hermitian=False)


def smeared_creator(basis: FockBasis, h):
    """a*(h), the adjoint of a(h)."""
    return smeared_annihilator(basis, h).adjoint()


def number_operator(basis: FockBasis):
    return OperatorMatrix(sp.diags(basis.number.astype(float)).tocsr(),
                          hermitian=True, complex_symmetric=True)


def ccr_defect(basis: FockBasis, h, l):
    """Spectral norm of [a(h), a*(l)] - <h,l> on states below the cap.

    Only states with fewer than N_max bosons are kept: on the top sector the
    truncation necessarily breaks the commutation relation.
    """
    h = np.asarray(h, dtype=complex)
    l = np.asarray(l, dtype=complex)
    a = smeared_annihilator(basis, h).mat
    ad = smeared_creator(basis, l).mat
    comm = (a @ ad - ad @ a).tocsr()
    keep = np.flatnonzero(basis.number < basis.N_max)
    if keep.size == 0:
        return 0.0
    block = comm[keep][:, keep] - np.vdot(h, l) * sp.identity(keep.size, format="csr")
    if keep.size <= 4000:
        return float(np.linalg.norm(block.toarray(), 2))
    return float(sp.linalg.norm(block))  # Frobenius upper bound
