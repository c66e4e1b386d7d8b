"""One-boson scattering kernel, smeared matrix elements and the time-domain oracle.

Wave packets are isotropic: h(k) = a_h * profile(|k|) with a scalar angular
weight a_h, so every solid-angle integral contributes a factor 4 pi.  The
inner product is antilinear in its first slot.

With u(z) = (sigma_1 Psi_0^theta)^T (H^theta - z)^{-1} (sigma_1 Psi_0^theta)
and u~(x) = conj(u(conj x)) the kernel on the energy shell reads

    T(k, k') = -2 pi i g^2 f(k) f(k') ||Psi_0||^-2 [u(lam0 + |k'|) + u~(lam0 - |k'|)]

and the smeared element is T(h, l) = i g^2 ||Psi_0||^-2 (T1 - T2) with
T1 = -2 pi int G(r) u(lam0 + r) dr and T2 = 2 pi int G(r) u~(lam0 - r) dr.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import curve_fit

from .contour import HermitianPropagator, gl_panels, graded_edges
from .distributions import TestFunction, bump_profile
from .hamiltonian import UPPER, ModelParams, apply_sigma1, assemble_full, sector_of_level
from .modes import FormFactorParams, form_factor
from .multiscale import CompactKernel, _tail
from .spectral import ResolventForm, ResonanceData, hermitian_ground_state

FOUR_PI = 4.0 * math.pi


class KernelDomainError(ValueError):
    """Raised for k = 0 or k' = 0, where the kernel is not defined."""


class TailWarning(RuntimeWarning):
    """The time integral was cut before J(s) had decayed."""


# --------------------------------------------------------------------------
# wave packets


@dataclass(frozen=True)
class WavePacket:
    """Isotropic one-boson wave function h(k) = angular * profile(|k|).

    ``support`` = (kappa, upper) with kappa > 0 bounds the radial profile,
    which must vanish outside it.
    """

    profile: Callable
    support: tuple
    angular: complex = 1.0
    name: str = ""

    def __post_init__(self):
        lo, hi = self.support
        if not 0 < lo < hi:
            raise ValueError("packet support must be [kappa, upper] with 0 < kappa < upper")

    @classmethod
    def bump(cls, center, width, angular=1.0, amplitude=1.0):
        """C-infinity bump on [center - width, center + width]."""
        if width <= 0:
            raise ValueError("width must be > 0")
        if center - width <= 0:
            raise ValueError("packet support must stay away from k = 0 (need center > width)")

        def prof(r):
            return amplitude * bump_profile((np.asarray(r, dtype=float) - center) / width)

        return cls(prof, (center - width, center + width), angular, f"bump({center},{width})")

    @property
    def kappa(self):
        return self.support[0]

    def radial(self, r):
        r = np.asarray(r, dtype=float)
        lo, hi = self.support
        out = np.where((r > lo) & (r < hi), self.profile(np.clip(r, lo, hi)), 0.0)
        return out.astype(complex)

    def __call__(self, r):
        return self.angular * self.radial(r)

    @property
    def sphere_weight(self):
        """int dSigma of the angular part."""
        return FOUR_PI * self.angular


def _overlap(h: WavePacket, l: WavePacket):
    lo, hi = max(h.support[0], l.support[0]), min(h.support[1], l.support[1])
    return (lo, hi) if lo < hi else None


def build_G(h: WavePacket, l: WavePacket, p: FormFactorParams) -> TestFunction:
    """G(r) = r^4 int dSigma dSigma' conj(h) l f(r)^2 for r > 0, zero for r <= 0."""
    win = _overlap(h, l)
    pref = np.conj(h.sphere_weight) * l.sphere_weight

    def G(r):
        r = np.asarray(r, dtype=float)
        out = np.zeros(r.shape, dtype=complex)
        if win is not None:
            m = (r > win[0]) & (r < win[1])
            rm = r[m]
            out[m] = (pref * rm ** 4 * np.conj(h.radial(rm)) * l.radial(rm)
                      * form_factor(rm, p) ** 2)
        return out if out.ndim else complex(out)

    window = win if win is not None else h.support
    return TestFunction(G, window, "compact", name=f"G[{h.name},{l.name}]")


def build_W(h: WavePacket, l: WavePacket, p: FormFactorParams) -> WavePacket:
    """W(k) = |k|^2 l(k) int dSigma conj(h(|k|, Sigma)) f(|k|), an isotropic packet."""
    win = _overlap(h, l) or l.support

    def prof(r):
        r = np.asarray(r, dtype=float)
        return (r ** 2 * l(r) * np.conj(h.sphere_weight) * np.conj(h.radial(r))
                * form_factor(r, p))

    return WavePacket(prof, win, 1.0, f"W[{h.name},{l.name}]")


def w_pairing(W: WavePacket, s, p: FormFactorParams, n=512):
    """<W_s, f>_2 = int d^3k conj(W(k)) e^{is|k|} f(k), with W_s = e^{-is omega} W."""
    r, w = gl_panels(np.linspace(*W.support, n // 16 + 1), 16)
    base = w * FOUR_PI * r ** 2 * np.conj(W(r)) * form_factor(r, p)
    s = np.asarray(s, dtype=float)
    out = np.exp(1j * np.multiply.outer(s, r)) @ base
    return out if out.ndim else complex(out)


def decay_exponent(values, s):
    """Log-log slope of -|values| against s."""
    return -float(np.polyfit(np.log(s), np.log(np.abs(values)), 1)[0])


class FourierPairing:
    """J(s) = int G(r) e^{is(r + shift)} dr, vectorized over s."""

    def __init__(self, G: TestFunction, shift, kernel=None, chunk=1024):
        self.kernel = kernel or CompactKernel(G)
        self.shift = complex(shift)
        self.chunk = chunk
        self.l1 = float(np.sum(self.kernel.w * np.abs(self.kernel.Gr)))

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        flat = s.ravel()
        out = np.empty(flat.shape, dtype=complex)
        wg = self.kernel.w * self.kernel.Gr
        for i in range(0, flat.size, self.chunk):
            si = flat[i:i + self.chunk]
            out[i:i + self.chunk] = (np.exp(1j * np.multiply.outer(si, self.kernel.r)) @ wg
                                     * np.exp(1j * si * self.shift))
        return out.reshape(s.shape) if s.ndim else complex(out[0])

    def decay_constant(self, s_lo, s_hi, n=400):
        """max over [s_lo, s_hi] of |J(s)| s^2."""
        s = np.linspace(s_lo, s_hi, n)
        return float(np.max(np.abs(self(s)) * s ** 2))


def build_J(G: TestFunction, lam0, window=400.0) -> TestFunction:
    """J(s) = int dr G(r) e^{is(r + lam0)} as a test function in s."""
    J = FourierPairing(G, lam0)
    return TestFunction(J, (-window, window), "schwartz", name=f"J[{G.name}]")


# --------------------------------------------------------------------------
# kernel and smeared element


def _check_radius(k):
    k = np.asarray(k, dtype=float)
    if np.any(k <= 0):
        raise KernelDomainError("the kernel is not defined for k = 0 (need k, k' > 0)")
    return k


def _prefactor(rd: ResonanceData, p: ModelParams):
    return -2j * math.pi * p.g ** 2 / rd.norm0 ** 2


def u_sum(form, lam0, r, route="conjugate", bar_form=None):
    """u(lam0 + r) + u~(lam0 - r) for real r (vectorized)."""
    r = np.asarray(r, dtype=float)
    up = form(lam0 + r)
    if route == "conjugate":
        down = np.conj(form(np.conj(lam0 - r)))
    elif route == "assemble":
        if bar_form is None:
            raise ValueError("route='assemble' needs the form built on the conjugate Hamiltonian")
        down = bar_form(lam0 - r)
    else:
        raise ValueError("route must be 'conjugate' or 'assemble'")
    return up + down


def bar_form(rd: ResonanceData, p: ModelParams, **kw):
    """Form on the separately assembled H^{conj theta} with the conjugate state."""
    Hbar = assemble_full(p, theta=p.theta.conjugate())
    return ResolventForm(Hbar, np.conj(rd.phi), **kw)


def kernel_T(rd: ResonanceData, H, k, kp, p: ModelParams, form=None, route="conjugate",
             bar=None):
    """T(k, k') on the energy shell; the resolvent argument uses |k'|."""
    k, kp = _check_radius(k), _check_radius(kp)
    form = form or ResolventForm(H, rd.phi)
    if route == "assemble" and bar is None:
        bar = bar_form(rd, p)
    fk = form_factor(k, p.form)
    fkp = form_factor(kp, p.form)
    val = _prefactor(rd, p) * fk * fkp * u_sum(form, rd.lam0, kp, route, bar)
    return val if np.ndim(val) else complex(val)


def kernel_closed_form(k, kp, p: ModelParams, lam0=0.0):
    """g -> 0 limit of the kernel, where u(z) = 1/(e1 - z)."""
    k, kp = _check_radius(k), _check_radius(kp)
    fk, fkp = form_factor(k, p.form), form_factor(kp, p.form)
    return (-2j * math.pi * p.g ** 2 * fk * fkp
            * (1.0 / (p.e1 - lam0 - kp) + 1.0 / (p.e1 - lam0 + kp)))


@dataclass
class SmearedParts:
    """Intermediate objects of the smeared element."""

    T1: complex
    T2: complex
    T11: complex | None = None
    T12: complex | None = None
    value: complex = 0j

    def to_dict(self):
        out = {}
        for key in ("T1", "T2", "T11", "T12", "value"):
            v = getattr(self, key)
            out[key] = None if v is None else [float(v.real), float(v.imag)]
        return out


def _support_nodes(G: TestFunction, panels, order):
    a, b = G.window
    return gl_panels(np.linspace(a, b, panels + 1), order)


def smeared_T(h: WavePacket, l: WavePacket, rd: ResonanceData, p: ModelParams, H=None,
              form=None, panels=12, order=16, route="conjugate"):
    """T(h, l) as one radial quadrature of conj(h) l T(|k|, |k|) over supp G."""
    G = build_G(h, l, p.form)
    if _overlap(h, l) is None:
        return 0j
    form = form or ResolventForm(H if H is not None else assemble_full(p), rd.phi)
    r, w = _support_nodes(G, panels, order)
    # isotropic packets: each solid-angle integral gives 4 pi times the value
    dens = FOUR_PI ** 2 * r ** 4 * np.conj(h(r)) * l(r)
    bar = bar_form(rd, p) if route == "assemble" else None
    T = kernel_T(rd, None, r, r, p, form=form, route=route, bar=bar)
    return complex(np.sum(w * dens * T))


def smeared_parts(h: WavePacket, l: WavePacket, rd: ResonanceData, p: ModelParams, H=None,
                  form=None, panels=16, order=16):
    """T1, T2 and i g^2 ||Psi_0||^-2 (T1 - T2) from G and the resolvent form."""
    G = build_G(h, l, p.form)
    if _overlap(h, l) is None:
        return SmearedParts(0j, 0j, value=0j)
    form = form or ResolventForm(H if H is not None else assemble_full(p), rd.phi)
    r, w = _support_nodes(G, panels, order)
    Gr = G(r)
    T1 = -2 * math.pi * np.sum(w * Gr * form(rd.lam0 + r))
    T2 = 2 * math.pi * np.sum(w * Gr * np.conj(form(np.conj(rd.lam0 - r))))
    val = 1j * p.g ** 2 / rd.norm0 ** 2 * (T1 - T2)
    return SmearedParts(complex(T1), complex(T2), value=complex(val))


# --------------------------------------------------------------------------
# proof intermediates T^(1,1), T^(1,2) and the q -> 0 factor


def t11_delta(G: TestFunction, form, lam0, panels=16, order=16):
    """T^(1,1) = -pi int_0^inf u(lam0 + z) G(z) dz."""
    r, w = _support_nodes(G, panels, order)
    return complex(-math.pi * np.sum(w * G(r) * form(lam0 + r)))


def real_line_nodes(center, features=(), core=30.0, ratio=0.3, h_min=1e-6, h_max=0.25, n=16):
    """Quadrature for the whole real line, refined geometrically towards features.

    Panels near a feature have width ~ ratio * distance, which resolves
    poles lying a comparable distance below the axis.  Beyond |x - center|
    = core the map x = core / s is used.
    """
    feats = [center, *[f for f in features if np.isfinite(f)]]
    e = graded_edges(center - core, center + core, feats, h_min=h_min, h_max=h_max,
                     ratio=ratio)
    x, w = gl_panels(e, n)
    xt, wt = _tail(core, math.inf, n)
    return (np.concatenate([x, center + xt, center - xt]),
            np.concatenate([w, wt, wt]))


def t12_pv(G: TestFunction, form, lam0, features=(), kernel=None, **kw):
    """T^(1,2) = i int_R dx u(x) PV int dr G(r) / (x - lam0 - r), the limit n, R -> inf.

    The inner principal value is the Hilbert transform of G.
    """
    k = kernel or CompactKernel(G)
    a0 = float(np.real(lam0))
    feats = [a0 + k.a, a0 + k.b, *features]
    x, w = real_line_nodes(a0, feats, **kw)
    inner = -k.hilbert(x - a0)
    return complex(1j * np.sum(w * form(x) * inner))


def t1_with_q(G: TestFunction, form, lam0, q, panels=16, order=16):
    """-pi int u(lam0 + z) G(z) (1 + e^{-iqz}) dz."""
    r, w = _support_nodes(G, panels, order)
    return complex(-math.pi * np.sum(w * G(r) * form(lam0 + r) * (1 + np.exp(-1j * q * r))))


def decomposition_check(G: TestFunction, form, lam0, features=(), qs=(1e-2, 1e-3)):
    """T^(1,1) + T^(1,2) against T^(1) = -2 pi int u G, and the q sensitivity."""
    T11 = t11_delta(G, form, lam0)
    T12 = t12_pv(G, form, lam0, features)
    T1 = t1_with_q(G, form, lam0, 0.0)
    q_vals = {q: t1_with_q(G, form, lam0, q) for q in qs}
    return {
        "T11": T11,
        "T12": T12,
        "T1": T1,
        "relative_defect": abs(T11 + T12 - T1) / abs(T1),
        "q_values": q_vals,
        "q_sensitivity": {q: abs(v - T1) / abs(T1) for q, v in q_vals.items()},
    }


# --------------------------------------------------------------------------
# time-domain oracle


@dataclass
class TimeDomainResult:
    value: complex
    T1: complex
    T2: complex
    tail_estimate: float
    s_max: float
    nodes: int
    e0: float
    norm0: float

    def to_dict(self):
        return {"value": [self.value.real, self.value.imag], "T1": [self.T1.real, self.T1.imag],
                "T2": [self.T2.real, self.T2.imag], "tail_estimate": self.tail_estimate,
                "s_max": self.s_max, "nodes": self.nodes, "e0": self.e0, "norm0": self.norm0}


@dataclass
class TimeDomainSetup:
    """Undilated ground state and sector eigendecomposition, reused across packets."""

    params: ModelParams
    e0: float
    norm0: float
    energies: np.ndarray
    weights: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, p: ModelParams, weight_floor=1e-18):
        p0 = p.replace(theta=0.0)
        e0, psi, norm0 = hermitian_ground_state(p0)
        prop = HermitianPropagator(assemble_full(p0), label=sector_of_level(UPPER))
        a = prop.weights(apply_sigma1(psi)).real
        keep = a > weight_floor * a.sum()
        return cls(p0, e0, norm0, prop.energies[keep], a[keep])

    def correlation(self, s):
        """C(s) = <sigma_1 Psi, e^{-isH} sigma_1 Psi>."""
        return np.exp(-1j * np.multiply.outer(np.asarray(s, float), self.energies)) @ self.weights


def time_domain_T(h: WavePacket, l: WavePacket, p: ModelParams, s_max=600.0, order=16,
                  setup: TimeDomainSetup | None = None, chunk=2048, rtol=1e-4):
    """T(h, l) = i g^2 ||Psi||^-2 (T1 - T2) by direct time quadrature at theta = 0.

    T1 = -2 pi i int_0^s_max J(s) C(s) ds with J(s) = int G e^{is(r + E0)},
    T2 = -2 pi i int_0^s_max J2(s) conj(C(s)) ds with J2(s) = int G e^{is(r - E0)}.
    The neglected tail is bounded by ||phi||^2 sup_{s > s_max} |J| s^2 / s_max.
    """
    st = setup or TimeDomainSetup.build(p)
    G = build_G(h, l, p.form)
    if _overlap(h, l) is None:
        return TimeDomainResult(0j, 0j, 0j, 0.0, s_max, 0, st.e0, st.norm0)
    k = CompactKernel(G)
    J1 = FourierPairing(G, st.e0, k)
    J2 = FourierPairing(G, -st.e0, k)
    omega = np.max(np.abs(st.energies)) + max(abs(k.a), abs(k.b)) + abs(st.e0)
    width = math.pi / omega
    edges = np.unique(np.concatenate([np.arange(0.0, s_max, width), [s_max]]))
    s, ws = gl_panels(edges, order)
    I1 = I2 = 0j
    for i in range(0, s.size, chunk):
        si, wi = s[i:i + chunk], ws[i:i + chunk]
        C = st.correlation(si)
        I1 += np.sum(wi * J1(si) * C)
        I2 += np.sum(wi * J2(si) * np.conj(C))
    T1, T2 = -2j * math.pi * I1, -2j * math.pi * I2
    val = 1j * st.params.g ** 2 / st.norm0 ** 2 * (T1 - T2)
    # sup_{s >= s_max} |J(s)| s^2, sampled on [s_max, 2 s_max]
    cj = max(J1.decay_constant(s_max, 2 * s_max), J2.decay_constant(s_max, 2 * s_max))
    tail = (2 * math.pi * st.params.g ** 2 / st.norm0 ** 2 * 2 * st.weights.sum()
            * cj / s_max)
    if tail > rtol * max(abs(val), 1e-300) and st.params.g != 0:
        warnings.warn(f"time integral cut at s_max={s_max}; tail estimate {tail:.2e}",
                      TailWarning, stacklevel=2)
    return TimeDomainResult(complex(val), complex(T1), complex(T2), float(tail), float(s_max),
                            int(s.size), st.e0, st.norm0)


def oracle_defect(td: complex, sm: complex, rtol=1e-3, atol=1e-8):
    """Verdict of |time-domain - smeared| <= rtol |smeared| + atol."""
    diff = abs(td - sm)
    bound = rtol * abs(sm) + atol
    return {"difference": diff, "bound": bound, "relative": diff / max(abs(sm), 1e-300),
            "pass": bool(diff <= bound)}


# --------------------------------------------------------------------------
# line shape


def lorentzian(x, A, c, w):
    return A * w ** 2 / ((x - c) ** 2 + w ** 2)


@dataclass
class KernelScan:
    """|k| grid, T(k, k) values and the fitted Lorentzian of |T|^2."""

    k: np.ndarray
    T: np.ndarray
    center: float | None = None
    half_width: float | None = None
    amplitude: float | None = None
    residual: float | None = None
    lam0: complex = 0j
    lam1: complex = 0j
    fit_ok: bool = False
    message: str = ""
    abs_fit: dict = field(default_factory=dict)

    @property
    def spacing(self):
        return float(np.max(np.diff(self.k)))

    def summary(self):
        def c(z):
            return [float(np.real(z)), float(np.imag(z))]
        return {
            "fit_ok": self.fit_ok,
            "message": self.message,
            "center": self.center,
            "half_width": self.half_width,
            "amplitude": self.amplitude,
            "residual": self.residual,
            "grid_spacing": self.spacing,
            "lambda0": c(self.lam0),
            "lambda1": c(self.lam1),
            "re_lambda1": float(np.real(self.lam1)),
            "re_lambda1_minus_lambda0": float(np.real(self.lam1 - self.lam0)),
            "abs_im_lambda1": float(abs(np.imag(self.lam1))),
            "abs_T_fit": self.abs_fit,
        }

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["k", "re_T", "im_T", "abs_T"])
            for k, t in zip(self.k, self.T):
                out.writerow([repr(float(k)), repr(float(t.real)), repr(float(t.imag)), repr(float(abs(t)))])

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _fit(k, y):
    i = int(np.argmax(y))
    half = y[i] / 2
    above = k[y >= half]
    w0 = max((above.max() - above.min()) / 2, np.min(np.diff(k)))
    popt, _ = curve_fit(lorentzian, k, y, p0=(y[i], k[i], w0), maxfev=20000)
    A, c, w = popt
    res = float(np.linalg.norm(lorentzian(k, *popt) - y) / np.linalg.norm(y))
    return float(A), float(c), float(abs(w)), res


def line_shape_scan(rd: ResonanceData, p: ModelParams, ks, H=None, form=None) -> KernelScan:
    """Tabulate T(|k|, |k|) over ``ks`` and fit A w^2 / ((k - c)^2 + w^2).

    The fit is made to |T|^2, whose half-width is |Im lambda1| for a
    simple pole; a fit to |T| itself is reported alongside.
    """
    ks = np.asarray(ks, dtype=float)
    form = form or ResolventForm(H if H is not None else assemble_full(p), rd.phi)
    T = np.asarray(kernel_T(rd, None, ks, ks, p, form=form))
    scan = KernelScan(ks, T, lam0=complex(rd.lam0), lam1=complex(rd.lam1))
    try:
        A, c, w, res = _fit(ks, np.abs(T) ** 2)
        scan.amplitude, scan.center, scan.half_width, scan.residual = A, c, w, res
        scan.fit_ok = True
        A1, c1, w1, res1 = _fit(ks, np.abs(T))
        scan.abs_fit = {"amplitude": A1, "center": c1, "half_width": w1, "residual": res1}
    except (RuntimeError, ValueError) as exc:
        scan.message = f"fit failed: {exc}"
    return scan
