import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sbscatter.fock import (DimensionError, ccr_defect, enumerate_basis, fock_dimension,
                            mode_annihilator, mode_creator, number_operator,
                            smeared_annihilator, smeared_creator)


def test_dimensions():
    assert enumerate_basis(3, 2).dim == 10
    b = enumerate_basis(1, 5)
    assert b.dim == 6
    assert [b.occupation(i) for i in range(6)] == [(n,) for n in range(6)]
    b0 = enumerate_basis(2, 0)
    assert b0.dim == 1 and b0.occupation(0) == (0, 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(0, 3))
def test_basis_round_trip(M, N):
    b = enumerate_basis(M, N)
    assert b.dim == fock_dimension(M, N)
    assert b.occupation(0) == (0,) * M
    for i in range(b.dim):
        assert b.index_of(b.occupation(i)) == i
    n = b.number
    assert np.all(np.diff(n) >= 0)


def test_dimension_guard():
    with pytest.raises(DimensionError):
        enumerate_basis(200, 4, max_dim=10_000)


def test_vacuum_annihilation_and_normalization():
    b = enumerate_basis(4, 2)
    vac = np.zeros(b.dim)
    vac[0] = 1.0
    for j in range(4):
        a = mode_annihilator(b, j)
        ad = mode_creator(b, j)
        assert np.all(a @ vac == 0)
        assert vac @ (a @ (ad @ vac)) == pytest.approx(1.0, abs=1e-15)


def test_creator_kills_top_sector():
    b = enumerate_basis(3, 2)
    top = np.zeros(b.dim)
    top[b.index_of((1, 1, 0))] = 1.0
    assert np.all(mode_creator(b, 0) @ top == 0)


def test_creator_is_adjoint():
    b = enumerate_basis(5, 3)
    for j in range(5):
        a = mode_annihilator(b, j).mat
        ad = mode_creator(b, j).mat
        assert abs(a.conj().T - ad).max() == 0


def test_ladder_amplitude():
    b = enumerate_basis(2, 3)
    v = np.zeros(b.dim)
    v[b.index_of((3, 0))] = 1.0
    out = mode_annihilator(b, 0) @ v
    assert out[b.index_of((2, 0))] == pytest.approx(np.sqrt(3))


def test_mode_index_range():
    b = enumerate_basis(3, 1)
    with pytest.raises(IndexError):
        mode_annihilator(b, 3)


def test_number_operator():
    b = enumerate_basis(4, 3)
    N = number_operator(b).mat
    assert np.array_equal(N.diagonal(), b.number.astype(float))
    acc = sum((mode_creator(b, j).mat @ mode_annihilator(b, j).mat) for j in range(4))
    assert abs(acc - N).max() < 1e-14


def test_smeared_antilinear_and_commuting(rng):
    b = enumerate_basis(4, 3)
    h = rng.normal(size=4) + 1j * rng.normal(size=4)
    l = rng.normal(size=4) + 1j * rng.normal(size=4)
    a_ih = smeared_annihilator(b, 1j * h).mat
    a_h = smeared_annihilator(b, h).mat
    assert abs(a_ih - (-1j) * a_h).max() < 1e-15
    a_l = smeared_annihilator(b, l).mat
    assert abs(a_h @ a_l - a_l @ a_h).max() < 1e-13
    vac = np.zeros(b.dim)
    vac[0] = 1.0
    assert np.all(a_h @ vac == 0)
    assert abs(smeared_creator(b, h).mat - a_h.conj().T).max() == 0


def test_ccr_unit_vector_on_vacuum():
    b = enumerate_basis(2, 3)
    e = np.array([1.0, 0.0])
    comm = (smeared_annihilator(b, e).mat @ smeared_creator(b, e).mat
            - smeared_creator(b, e).mat @ smeared_annihilator(b, e).mat)
    assert comm[0, 0] == pytest.approx(1.0)
    assert ccr_defect(b, e, e) <= 1e-12


def test_ccr_dense_oracle(rng):
    """Commutator from dense matrices agrees with the sparse defect."""
    b = enumerate_basis(4, 2)
    h = rng.normal(size=4) + 1j * rng.normal(size=4)
    l = rng.normal(size=4) + 1j * rng.normal(size=4)
    A = smeared_annihilator(b, h).toarray()
    Ad = smeared_creator(b, l).toarray()
    keep = b.number < 2
    C = (A @ Ad - Ad @ A)[np.ix_(keep, keep)] - np.vdot(h, l) * np.eye(keep.sum())
    assert np.linalg.norm(C, 2) <= 1e-12
    assert ccr_defect(b, h, l) <= 1e-12


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([(2, 3), (4, 2), (5, 2), (3, 3)]), st.integers(0, 2 ** 32 - 1))
def test_ccr_property(shape, seed):
    M, N = shape
    r = np.random.default_rng(seed)
    h = r.normal(size=M) + 1j * r.normal(size=M)
    l = r.normal(size=M) + 1j * r.normal(size=M)
    assert ccr_defect(enumerate_basis(M, N), h, l) <= 1e-12 * max(1.0, np.abs(h).max() * np.abs(l).max())
