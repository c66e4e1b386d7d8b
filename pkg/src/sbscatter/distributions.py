"""Fourier transform, principal value and Heaviside pairings on test functions.

Conventions: F[u](x) = int u(s) e^{-isx} ds and
F^{-1}[v](s) = (2 pi)^{-1} int v(x) e^{isx} dx.  With g_alpha(x) = Theta(x)
e^{-alpha x} one has F[g_alpha](phi) = int phi(s) / (alpha + i s) ds, which
tends to pi phi(0) - i PV int phi(s)/s ds as alpha -> 0+.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

QUAD_OPTS = dict(limit=800, epsabs=1e-14, epsrel=1e-12)


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach its tolerance."""


@dataclass(frozen=True)
class TestFunction:
    """A test function with an integration window outside which it is negligible.

    For ``kind="compact"`` the window is the support and the evaluator must
    vanish outside it.
    """

    func: Callable
    window: tuple
    kind: str = "schwartz"
    derivative: Callable | None = None
    name: str = ""

    __test__ = False  # keep pytest from collecting this class

    def __post_init__(self):
        a, b = self.window
        if not a < b:
            raise ValueError("window must satisfy a < b")
        if self.kind not in ("schwartz", "compact"):
            raise ValueError("kind must be 'schwartz' or 'compact'")

    def __call__(self, s):
        return self.func(s)

    @property
    def support(self):
        return self.window if self.kind == "compact" else None

    def deriv(self, s, h=1e-5):
        if self.derivative is not None:
            return self.derivative(s)
        return (self.func(s + h) - self.func(s - h)) / (2 * h)


def _accept(val, err, what):
    if not np.isfinite(val) or err > max(1e-10, 1e-8 * abs(val)):
        raise QuadratureError(f"{what} did not converge (error estimate {err:.2e})")


def _quad(f, a, b, points=None, **opts):
    """Complex-valued adaptive quadrature, raising on poor convergence."""
    kw = {**QUAD_OPTS, **opts}
    if points is not None:
        pts = [p for p in points if a < p < b]
        kw["points"] = pts or None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        re, er = integrate.quad(lambda s: np.real(f(s)), a, b, **kw)
        im, ei = integrate.quad(lambda s: np.imag(f(s)), a, b, **kw)
    val, err = complex(re, im), math.hypot(er, ei)
    _accept(val, err, "quadrature")
    return val, err


def _oscillatory(f, a, b, omega):
    """int_a^b f(s) e^{-i omega s} ds with QAWO for real and imaginary parts."""
    if omega == 0:
        return _quad(f, a, b)[0]
    kw = dict(limit=800, epsabs=1e-14, epsrel=1e-12, wvar=omega)
    total, err = 0j, 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for unit, comp in ((1.0, np.real), (1j, np.imag)):
            c, ec = integrate.quad(lambda s: comp(f(s)), a, b, weight="cos", **kw)
            s_, es = integrate.quad(lambda s: comp(f(s)), a, b, weight="sin", **kw)
            total += unit * (c - 1j * s_)
            err += ec + es
    _accept(total, err, "oscillatory quadrature")
    return complex(total)


def tail_estimate(phi: TestFunction):
    a, b = phi.window
    return float(abs(phi(a)) + abs(phi(b)))


def fourier(phi: TestFunction, x):
    """F[phi](x) = int phi(s) e^{-isx} ds over the window of phi."""
    a, b = phi.window
    try:
        return _oscillatory(phi.func, a, b, float(x))
    except QuadratureError as exc:
        raise QuadratureError(f"{exc}; window tail estimate {tail_estimate(phi):.2e}") from None


def inverse_fourier(v: TestFunction, s):
    """F^{-1}[v](s) = (2 pi)^{-1} int v(x) e^{isx} dx."""
    a, b = v.window
    return _oscillatory(v.func, a, b, -float(s)) / (2 * math.pi)


def fourier_transform(phi: TestFunction, window):
    """F[phi] as a test function on the given window (evaluated lazily)."""
    def f(x):
        if np.ndim(x):
            return np.array([fourier(phi, xi) for xi in np.ravel(x)]).reshape(np.shape(x))
        return fourier(phi, x)
    return TestFunction(f, tuple(window), "schwartz", name=f"F[{phi.name}]")


def pv_integral(phi: TestFunction, c=0.0):
    """PV int phi(s)/(s - c) ds as int_0^U (phi(c+u) - phi(c-u))/u du."""
    c = float(c)
    val = phi(c)
    if not np.isfinite(val):
        raise ValueError(f"test function is not finite at the center {c}")
    a, b = phi.window
    U = max(b - c, c - a)
    if U <= 0:
        return 0j

    def odd(u):
        return (phi(c + u) - phi(c - u)) / u

    return _quad(odd, 0.0, U, points=[b - c, c - a])[0]


def pv_excision(phi: TestFunction, c=0.0, eta=1e-3):
    """int over |s - c| > eta of phi(s)/(s - c), the defining excision form."""
    a, b = phi.window
    total = 0j
    if a < c - eta:
        total += _quad(lambda s: phi(s) / (s - c), a, c - eta)[0]
    if c + eta < b:
        total += _quad(lambda s: phi(s) / (s - c), c + eta, b)[0]
    return total


def heaviside_pairing(phi: TestFunction, q=0.0):
    """Theta_q(phi) = int_q^infinity phi(s) ds."""
    a, b = phi.window
    lo = max(q, a)
    if lo >= b:
        return 0j
    return _quad(phi.func, lo, b)[0]


def delta_pairing(phi: TestFunction):
    return complex(phi(0.0))


def _breakpoints(alpha, L):
    k = np.arange(0, int(math.ceil(math.log10(max(L / alpha, 10.0)))) + 1)
    pos = alpha * 10.0 ** k
    pos = pos[pos < L]
    return np.unique(np.concatenate([pos, [L]]))


def mollified_pairing(phi: TestFunction, alpha):
    """F[g_alpha](phi) = int phi(s)/(alpha + is) ds for alpha > 0.

    The even Lorentzian part alpha/(alpha^2+s^2) and the odd part
    s/(alpha^2+s^2) are integrated separately over breakpoints at
    alpha * 10^k so that the alpha-scale peak is resolved.
    """
    if not alpha > 0:
        raise ValueError("alpha must be > 0")
    a, b = phi.window
    L = max(abs(a), abs(b))
    edges = np.concatenate([[0.0], _breakpoints(alpha, L)])

    def even(s):
        return alpha / (alpha * alpha + s * s) * (phi(s) + phi(-s))

    def odd(s):
        return s / (alpha * alpha + s * s) * (phi(s) - phi(-s))

    re = sum(_quad(even, lo, hi)[0] for lo, hi in zip(edges[:-1], edges[1:]))
    im = sum(_quad(odd, lo, hi)[0] for lo, hi in zip(edges[:-1], edges[1:]))
    return complex(re - 1j * im)


def sokhotski_limit(phi: TestFunction):
    """pi phi(0) - i PV int phi(s)/s ds."""
    return complex(math.pi * phi(0.0) - 1j * pv_integral(phi, 0.0))


def sokhotski_defect(phi: TestFunction, alpha):
    return abs(mollified_pairing(phi, alpha) - sokhotski_limit(phi))


def fit_order(alphas, defects):
    """Least-squares slope of log(defect) against log(alpha)."""
    la, ld = np.log(np.asarray(alphas, float)), np.log(np.asarray(defects, float))
    return float(np.polyfit(la, ld, 1)[0])


def extrapolate_to_zero(alphas, values, degree=None):
    """Polynomial extrapolation of values(alpha) to alpha = 0.

    The default degree interpolates all points (Richardson extrapolation).
    """
    alphas = np.asarray(alphas, dtype=float)
    values = np.asarray(values, dtype=complex)
    if degree is None:
        degree = alphas.size - 1
    re = np.polyfit(alphas, values.real, degree)[-1]
    im = np.polyfit(alphas, values.imag, degree)[-1]
    return complex(re, im)


# --------------------------------------------------------------------------
# test-function library


def gaussian(center=0.0, width=1.0):
    def f(s):
        return np.exp(-((np.asarray(s) - center) / width) ** 2)

    def df(s):
        x = (np.asarray(s) - center) / width
        return -2 * x / width * np.exp(-x * x)

    L = 8.0 * width
    return TestFunction(f, (center - L, center + L), "schwartz", df, f"gauss({center},{width})")


def odd_gaussian():
    def f(s):
        s = np.asarray(s)
        return s * np.exp(-s * s)

    def df(s):
        s = np.asarray(s)
        return (1 - 2 * s * s) * np.exp(-s * s)

    return TestFunction(f, (-9.0, 9.0), "schwartz", df, "s*gauss")


def hermite_gaussian(k):
    """H_k(s) exp(-s^2) with the physicists' Hermite polynomial H_k."""
    coef = np.zeros(k + 1)
    coef[k] = 1.0

    def f(s):
        s = np.asarray(s)
        return np.polynomial.hermite.hermval(s, coef) * np.exp(-s * s)

    L = 9.0 + math.sqrt(k)
    return TestFunction(f, (-L, L), "schwartz", None, f"hermite{k}*gauss")


def bump_profile(x):
    """exp(1 - 1/(1 - x^2)) on |x| < 1, zero outside; equals 1 at x = 0."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    m = np.abs(x) < 1
    out[m] = np.exp(1.0 - 1.0 / (1.0 - x[m] ** 2))
    return out if out.ndim else float(out)


def bump(center=0.0, half_width=1.0):
    """C-infinity bump supported on [center - half_width, center + half_width]."""
    def f(s):
        return bump_profile((np.asarray(s, dtype=float) - center) / half_width)

    return TestFunction(f, (center - half_width, center + half_width), "compact", None,
                        f"bump({center},{half_width})")


def standard_family():
    """The four-function family: Gaussian, shifted Gaussian, bump, s*Gaussian."""
    return [gaussian(), gaussian(center=0.5), bump(0.0, 1.0), odd_gaussian()]
