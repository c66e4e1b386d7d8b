import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sbscatter.hamiltonian import (LOWER, UPPER, ModelParams, apply_sigma1, assemble_free,
                                   assemble_full, assemble_interaction, export_matrix_market,
                                   import_matrix_market, level_index, parity_labels, restrict,
                                   sector_of_level, vacuum_state)
from sbscatter.modes import RadialGrid

from conftest import graded_grid, model


def one_mode(g=0.3, e1=1.0, node=1.0, weight=0.5, N_max=1, theta=0.0):
    grid = RadialGrid(np.array([node]), np.array([weight]))
    return ModelParams(grid, e1=e1, g=g, N_max=N_max, theta=theta)


def test_parameter_validation():
    grid = graded_grid(4)
    with pytest.raises(ValueError):
        ModelParams(grid, e1=0.0)
    with pytest.raises(ValueError):
        ModelParams(grid, g=-0.1)
    with pytest.raises(ValueError):
        ModelParams(grid, N_max=-1)
    p = ModelParams(grid, theta=0.1j)
    assert p.theta.value == 0.1j
    assert p.replace(theta=0.05j).theta.nu == 0.05


def test_index_layout():
    p = model(M=3, N_max=2)
    b = p.basis
    assert p.dim == 2 * b.dim
    assert level_index(b, UPPER) == 0 and level_index(b, LOWER) == b.dim
    assert vacuum_state(b, LOWER)[b.dim] == 1
    lab = parity_labels(b)
    assert lab[level_index(b, UPPER)] == sector_of_level(UPPER) == 0
    assert lab[level_index(b, LOWER)] == sector_of_level(LOWER) == 1


def test_sigma1_swaps_blocks():
    x = np.arange(6.0)
    assert np.array_equal(apply_sigma1(x), [3, 4, 5, 0, 1, 2])
    assert np.array_equal(apply_sigma1(apply_sigma1(x)), x)


def test_free_diagonal_values():
    p = model(M=4, N_max=2)
    d = assemble_free(p, theta=0.0).mat.diagonal()
    b = p.basis
    w = p.grid.nodes
    i = b.index_of((1, 0, 1, 0))
    assert d[i] == pytest.approx(p.e1 + w[0] + w[2])
    assert d[b.dim + i] == pytest.approx(w[0] + w[2])


def test_structure_flags_and_conjugation():
    p = model(M=6, N_max=2)
    H = assemble_full(p)
    herm, sym = H.symmetry_defects()
    assert sym == 0.0 and herm > 1e-3
    assert H.check_flags()
    H0 = assemble_full(p, theta=0.0)
    assert H0.symmetry_defects()[0] == 0.0 and H0.hermitian and H0.check_flags()
    Hbar = assemble_full(p, theta=-0.15j)
    assert abs(Hbar.mat - H.mat.conj()).max() < 1e-15


def test_parity_conservation():
    p = model(M=5, N_max=3)
    H = assemble_full(p).toarray()
    lab = parity_labels(p.basis)
    assert np.all(H[np.ix_(lab == 0, lab == 1)] == 0)
    assert np.all(H[np.ix_(lab == 1, lab == 0)] == 0)


def test_interaction_is_sigma1_times_field():
    p = model(M=4, N_max=2)
    V = assemble_interaction(p).toarray()
    D = p.basis.dim
    assert np.all(V[:D, :D] == 0) and np.all(V[D:, D:] == 0)
    assert np.array_equal(V[:D, D:], V[D:, :D])


def test_one_mode_closed_form():
    g, c_w = 0.3, 0.5
    p = one_mode(g=g, weight=c_w)
    c = p.couplings(0.0)[0].real
    H = assemble_full(p)
    for label, (a, b) in ((0, (1.0, 1.0)), (1, (0.0, 2.0))):
        sub, _ = restrict(H, label)
        ev = np.sort(np.linalg.eigvalsh(sub.toarray()))
        mean, half = (a + b) / 2, np.hypot((a - b) / 2, g * c)
        assert np.allclose(ev, [mean - half, mean + half], atol=1e-14)


def test_g_zero_spectrum_is_free():
    p = model(M=5, N_max=2, g=0.0)
    H = assemble_full(p, theta=0.0)
    assert abs(H.mat - assemble_free(p, theta=0.0).mat).max() == 0


def test_matrix_market_round_trip(tmp_path):
    H = assemble_full(model(M=4, N_max=2))
    path = tmp_path / "H.mtx"
    export_matrix_market(H, path, comment="test")
    back = import_matrix_market(path)
    assert abs(back - H.mat).max() <= 1e-15 * abs(H.mat).max()


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 6), st.integers(1, 3), st.floats(0.0, 0.5), st.floats(-0.19, 0.19))
def test_invariants_property(M, N, g, nu):
    p = model(M=M, N_max=N, g=g, theta=complex(0, nu))
    H = assemble_full(p)
    herm, sym = H.symmetry_defects()
    assert sym == 0.0
    if nu == 0:
        assert herm == 0.0
    lab = H.parity
    dense = H.toarray()
    assert np.all(dense[np.ix_(lab == 0, lab == 1)] == 0)
