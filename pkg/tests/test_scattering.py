import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sbscatter.hamiltonian import assemble_full
from sbscatter.modes import FormFactorParams, form_factor
from sbscatter.scattering import (KernelDomainError, TailWarning, TimeDomainSetup, WavePacket,
                                  _fit, bar_form, build_G, build_W, decay_exponent,
                                  decomposition_check, kernel_T, kernel_closed_form,
                                  line_shape_scan, lorentzian, oracle_defect, smeared_parts,
                                  smeared_T, time_domain_T, w_pairing)
from sbscatter.spectral import eigen_resonances

from conftest import Desk, model

FP = FormFactorParams()


def packet(c=1.0, w=0.3, a=1.0):
    return WavePacket.bump(c, w, angular=a)


def test_packet_validation():
    with pytest.raises(ValueError):
        WavePacket.bump(0.3, 0.3)
    with pytest.raises(ValueError):
        WavePacket.bump(1.0, 0.0)
    h = packet()
    assert h(0.65) == 0 and h(1.35) == 0 and h(1.0) == pytest.approx(1.0)
    assert h.kappa == pytest.approx(0.7)


def test_G_support_and_value():
    h, l = packet(1.0, 0.3, 1j), packet(1.1, 0.4)
    G = build_G(h, l, FP)
    assert G.window == pytest.approx((0.7, 1.3))
    assert G(0.69) == 0 and G(1.31) == 0
    r = 0.95
    expect = (np.conj(4 * math.pi * 1j) * 4 * math.pi * r ** 4 * np.conj(h.radial(r))
              * l.radial(r) * form_factor(r, FP) ** 2)
    assert G(r) == pytest.approx(complex(expect), rel=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 1.5), st.floats(0.1, 0.4), st.floats(0.5, 1.5), st.floats(0.1, 0.4),
       st.floats(0.3, 2.0))
def test_G_hermitian_swap(c1, w1, c2, w2, r):
    h, l = WavePacket.bump(c1, w1, 1 + 1j), WavePacket.bump(c2, w2, 2 - 0.5j)
    assert build_G(h, l, FP)(r) == pytest.approx(np.conj(build_G(l, h, FP)(r)), abs=1e-14)


def test_disjoint_packets_vanish(small):
    h, l = packet(0.6, 0.1), packet(1.2, 0.1)
    assert np.all(build_G(h, l, FP)(np.linspace(0.1, 2, 50)) == 0)
    assert smeared_T(h, l, small.rd, small.p, form=small.form) == 0
    assert smeared_parts(h, l, small.rd, small.p, form=small.form).value == 0
    assert time_domain_T(h, l, small.p).value == 0


def test_kernel_domain(small):
    with pytest.raises(KernelDomainError):
        kernel_T(small.rd, small.H, 0.0, 1.0, small.p, form=small.form)
    with pytest.raises(KernelDomainError):
        kernel_T(small.rd, small.H, 1.0, np.array([0.5, -0.1]), small.p, form=small.form)
    with pytest.raises(KernelDomainError):
        kernel_closed_form(1.0, 0.0, small.p)


def test_kernel_vanishes_at_zero_coupling():
    p = model(M=20, N_max=1, g=0.0)
    rd = eigen_resonances(p)
    assert kernel_T(rd, assemble_full(p), 1.0, 0.8, p) == 0
    assert kernel_closed_form(1.0, 0.8, p) == 0


def test_kernel_factorizes_in_k(small):
    kp = 0.8
    ks = np.array([0.3, 0.7, 1.4])
    T = np.array([kernel_T(small.rd, None, k, kp, small.p, form=small.form) for k in ks])
    ratio = T / form_factor(ks, small.p.form)
    assert np.allclose(ratio, ratio[0], rtol=1e-13)


def test_kernel_routes_agree(small):
    ks = np.array([0.4, 1.0, 1.7])
    a = kernel_T(small.rd, None, ks, ks, small.p, form=small.form)
    b = kernel_T(small.rd, None, ks, ks, small.p, form=small.form, route="assemble",
                 bar=bar_form(small.rd, small.p))
    assert np.allclose(a, b, rtol=1e-10, atol=0)


def test_kernel_weak_coupling_limit():
    """Off resonance the kernel approaches the free closed form with O(g^2) error."""
    ks = np.array([0.4, 1.8])
    errs = []
    for g in (0.02, 0.01):
        p = model(M=40, N_max=1, g=g)
        rd = eigen_resonances(p)
        T = kernel_T(rd, assemble_full(p), ks, ks, p)
        ref = kernel_closed_form(ks, ks, p, lam0=rd.lam0)
        errs.append(np.max(np.abs(T - ref) / np.abs(ref)))
    assert errs[0] < 2e-2
    assert errs[1] == pytest.approx(errs[0] / 4, rel=0.1)


def test_smeared_forms_agree(small):
    h, l = packet(), packet(1.1, 0.4)
    a = smeared_T(h, l, small.rd, small.p, form=small.form)
    b = smeared_parts(h, l, small.rd, small.p, form=small.form).value
    c = smeared_T(h, l, small.rd, small.p, form=small.form, route="assemble")
    assert abs(a - b) <= 1e-8 * abs(a)
    assert abs(a - c) <= 1e-10 * abs(a)


def test_smeared_antilinear_linear(small):
    h, l = packet(), packet(0.9, 0.35)
    base = smeared_T(h, l, small.rd, small.p, form=small.form)
    ih = packet(a=1j)
    assert smeared_T(ih, l, small.rd, small.p, form=small.form) == pytest.approx(-1j * base)
    il = WavePacket.bump(0.9, 0.35, angular=1j)
    assert smeared_T(h, il, small.rd, small.p, form=small.form) == pytest.approx(1j * base)


def test_off_resonance_g2_scaling():
    h = l = packet(0.45, 0.15)
    vals = []
    for g in (0.02, 0.01):
        d = Desk(model(M=40, N_max=1, g=g))
        vals.append(smeared_T(h, l, d.rd, d.p, form=d.form))
    assert abs(vals[0] / vals[1]) == pytest.approx(4.0, rel=0.01)


def test_w_pairing_decays(small):
    W = build_W(packet(), packet(), FP)
    s = np.array([50.0, 100.0, 200.0])
    vals = w_pairing(W, s, FP)
    assert decay_exponent(vals, s) >= 2.0
    # s = 0 is the plain integral of conj(W) f over k-space
    r = np.linspace(0.7, 1.3, 20001)
    ref = np.trapezoid(4 * math.pi * r ** 2 * np.conj(W(r)) * form_factor(r, FP), r)
    assert w_pairing(W, 0.0, FP) == pytest.approx(ref, rel=1e-6)


def test_decomposition_small_model(small):
    G = build_G(packet(), packet(), small.p.form)
    d = decomposition_check(G, small.form, small.rd.lam0, features=[small.rd.lam1.real])
    assert d["relative_defect"] < 1e-7
    assert d["q_sensitivity"][1e-3] < d["q_sensitivity"][1e-2]


def test_time_domain_oracle_small_model(small):
    h, l = packet(), packet(1.1, 0.4)
    setup = TimeDomainSetup.build(small.p)
    td = time_domain_T(h, l, small.p, s_max=400.0, setup=setup)
    sm = smeared_T(h, l, small.rd, small.p, form=small.form)
    v = oracle_defect(td.value, sm)
    assert v["pass"], v
    assert td.tail_estimate < 1e-4 * abs(td.value)
    assert td.norm0 == pytest.approx(small.rd.norm0, rel=1e-12)


def test_tail_warning(small):
    with pytest.warns(TailWarning):
        time_domain_T(packet(), packet(), small.p, s_max=5.0)


def test_oracle_defect_verdict():
    assert oracle_defect(1.0005, 1.0)["pass"]
    assert not oracle_defect(1.01, 1.0)["pass"]
    assert oracle_defect(5e-9, 0.0)["pass"]


def test_lorentzian_fit_recovers_parameters():
    k = np.linspace(0.8, 1.2, 41)
    y = lorentzian(k, 2.0, 1.03, 0.04)
    A, c, w, res = _fit(k, y)
    assert (A, c, w) == pytest.approx((2.0, 1.03, 0.04), rel=1e-8)
    assert res < 1e-10


def test_line_shape_small_model(tmp_path):
    d = Desk(model(M=40, N_max=1, g=0.05))
    lam1 = d.rd.lam1
    g = abs(lam1.imag)
    ks = np.linspace(lam1.real - 5 * g, lam1.real + 5 * g, 41)
    scan = line_shape_scan(d.rd, d.p, ks, form=d.form)
    assert scan.fit_ok
    assert abs(scan.center - lam1.real) < scan.spacing
    assert scan.half_width == pytest.approx(g, rel=0.15)
    # a fit to |T| rather than |T|^2 doubles the width of a Lorentzian peak
    assert scan.abs_fit["half_width"] == pytest.approx(2 * scan.half_width, rel=0.2)
    scan.to_csv(tmp_path / "scan.csv")
    scan.to_json(tmp_path / "scan.json")
    data = np.loadtxt(tmp_path / "scan.csv", delimiter=",", skiprows=1)
    assert data.shape == (41, 4)
    summ = json.loads((tmp_path / "scan.json").read_text())
    assert summ["fit_ok"] and summ["abs_im_lambda1"] == pytest.approx(g)
