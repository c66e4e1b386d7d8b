"""Multiscale sequences and convergence experiments for the resolvent integrals.

rho_n = rho0 rho^n and eps_n = 20 rho_n^(1 + mu/4) set the radius of the
half circle around lambda0 that the real integration path avoids.  The two
experiments here measure how

    T_{n,R}(eta) = int_{Gamma_-(eps_n, R)} dz u(z) int dr G(r)/(z - lambda0 - r) [r outside I_eta(z)]

approaches pi i int G(r) u(r + lambda0) dr, and how the oscillatory
integrals A(Q, n, R) behave as Q grows.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .contour import gl_panels, graded_edges

GL_ORDER = 16


@dataclass(frozen=True)
class MultiscaleParams:
    rho0: float = 0.2
    rho: float = 1e-4
    mu: float = 0.25
    C_bold: float = 1.05
    m: int = 4
    nu: float = 0.15
    e1: float = 1.0

    def __post_init__(self):
        if not 0 < self.rho0 < 1:
            raise ValueError("rho0 must lie in (0, 1)")
        if not 0 < self.rho < min(1.0, self.e1 / 4):
            raise ValueError("rho must lie in (0, min(1, e1/4))")
        if not 0 < self.mu < 0.5:
            raise ValueError("mu must lie in (0, 1/2)")
        if not self.C_bold > 0:
            raise ValueError("C_bold must be > 0")
        if self.m < 4:
            raise ValueError("m must be >= 4")


def iota(mu):
    return (mu / 4) / (1 + mu / 4)


def sequences(p: MultiscaleParams, n):
    """(rho_n, eps_n) for n >= 1."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rho_n = p.rho0 * p.rho ** n
    return rho_n, 20.0 * rho_n ** (1 + p.mu / 4)


def check_admissibility(p: MultiscaleParams):
    """Evaluate the three admissibility inequalities on (C, rho0, rho)."""
    c, mu = p.C_bold, p.mu
    checks = {
        "C^8 rho0^mu <= 1": c ** 8 * p.rho0 ** mu,
        "C^8 rho^mu <= 1/4": c ** 8 * p.rho ** mu,
        "C rho^(iota(1+mu/4)/2) <= 1": c * p.rho ** (iota(mu) * (1 + mu / 4) / 2),
    }
    bounds = {"C^8 rho0^mu <= 1": 1.0, "C^8 rho^mu <= 1/4": 0.25,
              "C rho^(iota(1+mu/4)/2) <= 1": 1.0}
    report = {k: {"value": v, "bound": bounds[k], "ok": v <= bounds[k]} for k, v in checks.items()}
    return all(r["ok"] for r in report.values()), report


def series_partial_sums(p: MultiscaleParams, n_terms=20):
    """Partial sums of sum_j C^(j+2) eps_j / rho_(j+1)."""
    terms = []
    for j in range(1, n_terms + 1):
        _, eps = sequences(p, j)
        rho_next, _ = sequences(p, j + 1)
        terms.append(p.C_bold ** (j + 2) * eps / rho_next)
    return np.cumsum(terms)


def surrogate_u(e1=1.0, gamma=0.05):
    """u(z) = 1/(e1 - i gamma - z): analytic in the closed upper half plane.

    With gamma = 0 the pole sits on the real integration path, so a small
    positive gamma stands in for the resonance width.
    """
    pole = complex(e1, -gamma)

    def u(z):
        return 1.0 / (pole - np.asarray(z, dtype=complex))

    u.pole = pole
    return u


# --------------------------------------------------------------------------
# inner r-integrals


class CompactKernel:
    """Gauss-Legendre data for a compactly supported smooth G on [a, b]."""

    def __init__(self, G, panels=64, order=GL_ORDER):
        a, b = G.window
        self.G = G
        self.a, self.b = float(a), float(b)
        self.r, self.w = gl_panels(np.linspace(a, b, panels + 1), order)
        self.Gr = np.asarray(G(self.r), dtype=complex)
        self._v, self._vw = np.polynomial.legendre.leggauss(order)

    def integral(self, f=None):
        vals = self.Gr if f is None else self.Gr * f(self.r)
        return complex(np.sum(self.w * vals))

    def hilbert(self, x, chunk=2048):
        """PV int G(r)/(r - x) dr for real x (vectorized)."""
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape, dtype=complex)
        flat, res = x.ravel(), out.ravel()
        for s in range(0, flat.size, chunk):
            xs = flat[s:s + chunk]
            gx = np.asarray(self.G(xs), dtype=complex)
            d = self.r[None, :] - xs[:, None]
            tiny = np.abs(d) < 1e-9
            d = np.where(tiny, 1.0, d)
            q = (self.Gr[None, :] - gx[:, None]) / d
            if tiny.any():
                q = np.where(tiny, 0.0, q)
            inside = (xs > self.a) & (xs < self.b)
            log = np.zeros(xs.size)
            log[inside] = np.log((self.b - xs[inside]) / (xs[inside] - self.a))
            res[s:s + chunk] = q @ self.w + gx * log
        return out

    def window_pv(self, x, eta):
        """PV int_{x-eta}^{x+eta} G(r)/(r - x) dr = int_0^eta (G(x+v)-G(x-v))/v dv."""
        x = np.asarray(x, dtype=float)
        if eta == 0:
            return np.zeros(x.shape, dtype=complex)
        v = 0.5 * eta * (self._v + 1.0)
        wv = 0.5 * eta * self._vw
        diff = (np.asarray(self.G(x[..., None] + v), dtype=complex)
                - np.asarray(self.G(x[..., None] - v), dtype=complex)) / v
        return diff @ wv

    def excised(self, x, eta):
        """int over r outside [x - eta, x + eta] of G(r)/(x - r) dr."""
        return -self.hilbert(x) + self.window_pv(x, eta)


def _check_hypothesis(G, eps, eta):
    a, b = G.window
    lim = 2 * (eps + eta)
    if a < lim and b > -lim:
        raise ValueError(
            f"G must vanish on [-{lim:.3g}, {lim:.3g}], but its support [{a}, {b}] overlaps it")


def _tail(start, end, n):
    """Nodes on [start, end] with 0 < start < end <= inf, graded geometrically."""
    if np.isfinite(end):
        e = np.geomspace(start, end, max(2, int(4 * math.log(end / start)) + 2))
        return gl_panels(e, n)
    s, ws = gl_panels(np.linspace(0.0, 1.0, 9), n)   # z = start / s
    return start / s, start * ws / s ** 2


def _real_line_nodes(lo, hi, features, core=30.0, n=GL_ORDER):
    """Nodes/weights on [lo, hi]; either end may be infinite."""
    nodes, weights = [], []
    clo, chi = max(lo, -core), min(hi, core)
    if chi > clo:
        x, w = gl_panels(graded_edges(clo, chi, features, h_min=1e-3, h_max=0.25), n)
        nodes.append(x)
        weights.append(w)
    if hi > core:
        x, w = _tail(max(core, lo), hi, n)
        nodes.append(x)
        weights.append(w)
    if lo < -core:
        x, w = _tail(max(core, -hi), -lo, n)
        nodes.append(-x)
        weights.append(w)
    return np.concatenate(nodes), np.concatenate(weights)


def gamma_minus_nodes(lam0, eps, R, features):
    """Quadrature for [-R, lam0 - eps] U [lam0 + eps, R] (R may be inf)."""
    a0 = float(np.real(lam0))
    x1, w1 = _real_line_nodes(-R, a0 - eps, features)
    x2, w2 = _real_line_nodes(a0 + eps, R, features)
    return np.concatenate([x1, x2]), np.concatenate([w1, w2])


def T_n_R_eta(G, u, lam0, n, R, eta, p: MultiscaleParams, kernel=None):
    """Double integral T_{n,R}(eta); eta = 0 gives the principal-value limit."""
    _, eps = sequences(p, n)
    _check_hypothesis(G, eps, eta)
    if R <= max(abs(G.window[0]), abs(G.window[1])) + abs(lam0):
        raise ValueError("R must exceed the support of G shifted by lambda0")
    k = kernel or CompactKernel(G)
    if not np.any(k.Gr):
        return 0j
    a0 = float(np.real(lam0))
    feats = [a0 + k.a, a0 + k.b, float(np.real(getattr(u, "pole", np.nan)))]
    z, w = gamma_minus_nodes(lam0, eps, R, feats)
    inner = k.excised(z - a0, eta)
    return complex(np.sum(w * u(z) * inner))


def pv_limit_target(G, u, lam0, kernel=None):
    """pi i int G(r) u(r + lambda0) dr."""
    k = kernel or CompactKernel(G)
    return 1j * math.pi * k.integral(lambda r: u(r + lam0))


def pv_limit_defect(G, u, lam0, n, R, eta, p, kernel=None):
    k = kernel or CompactKernel(G)
    return abs(T_n_R_eta(G, u, lam0, n, R, eta, p, k) - pv_limit_target(G, u, lam0, k))


def closed_path_oracle(G, u, lam0, n, R, eta, p: MultiscaleParams, r_panels=32, arc_panels=16):
    """Minus the integral over the big half circle, the eta circle and Gamma_c.

    For each r in supp G the real-axis integral with the two holes equals
    minus the closing arcs by Cauchy's theorem; the result is then paired
    with G(r).
    """
    if eta <= 0 or not np.isfinite(R):
        raise ValueError("closed-path oracle needs eta > 0 and finite R")
    _, eps = sequences(p, n)
    _check_hypothesis(G, eps, eta)
    a, b = G.window
    r, wr = gl_panels(np.linspace(a, b, r_panels + 1), GL_ORDER)
    Gr = np.asarray(G(r), dtype=complex)
    t, wt = gl_panels(np.linspace(0.0, math.pi, arc_panels + 1), GL_ORDER)
    a0 = float(np.real(lam0))
    # big arc: R e^{it}, counter-clockwise
    zR = R * np.exp(1j * t)
    dzR = 1j * zR * wt
    # arcs over the holes, traversed left to right through the upper half plane
    ph = np.exp(1j * (math.pi - t))
    dph = -1j * ph * wt
    zc = a0 + eps * ph
    dzc = eps * dph
    total = 0j
    for ri, gi, wi in zip(r, Gr, wr):
        c = a0 + ri
        big = np.sum(dzR * u(zR) / (zR - c))
        zr = c + eta * ph
        small = np.sum(eta * dph * u(zr) / (zr - c))
        hole = np.sum(dzc * u(zc) / (zc - c))
        total += wi * gi * -(big + small + hole)
    return complex(total)


def _slope(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def pv_limit_rates(G, u, lam0, p: MultiscaleParams, n_levels=(1, 2, 3),
                R_levels=(25.0, 50.0, 100.0, 200.0), eta_levels=(1e-3, 2e-3, 4e-3, 8e-3)):
    """Refinement study of the defect along each axis separately.

    Each sweep holds the other two parameters at their limit values
    (R = inf, eta = 0, n = max(n_levels)) so that only one error source is
    present.  Exponents are log-log slopes of the defect against rho_n,
    1/R and eta.
    """
    k = CompactKernel(G)
    target = pv_limit_target(G, u, lam0, k)
    n_top = max(n_levels)
    rows = []

    def cell(n, R, eta):
        val = T_n_R_eta(G, u, lam0, n, R, eta, p, k)
        d = abs(val - target)
        rows.append({"n": n, "R": R, "eta": eta, "defect": d})
        return d

    d_n = [cell(n, math.inf, 0.0) for n in n_levels]
    d_R = [cell(n_top, R, 0.0) for R in R_levels]
    d_eta = [cell(n_top, math.inf, eta) for eta in eta_levels]
    rho_n = [sequences(p, n)[0] for n in n_levels]
    return {
        "target": target,
        "rows": rows,
        "exponent_rho": _slope(rho_n, d_n),
        "exponent_invR": _slope(1.0 / np.asarray(R_levels), d_R),
        "exponent_eta": _slope(eta_levels, d_eta),
        "expected": {"rho": p.mu / 8, "invR": 1.0, "eta": 1.0},
        "defects": {"n": d_n, "R": d_R, "eta": d_eta},
    }


# --------------------------------------------------------------------------
# oscillatory integrals A(Q, n, R)


def oscillatory_inner(u, lam0, n, R, p: MultiscaleParams, s, features=(), chunk=128):
    """F(s) = int_{Gamma_-(eps_n,R)} e^{-is(z - lambda0)} u(z) dz for an array of s."""
    _, eps = sequences(p, n)
    s = np.asarray(s, dtype=float)
    smax = float(np.max(np.abs(s))) if s.size else 1.0
    a0 = float(np.real(lam0))
    h = min(0.25, 1.5 / max(smax, 1e-12))
    feats = [float(np.real(getattr(u, "pole", np.nan))), *features]
    nodes, weights = [], []
    for lo, hi in ((-R, a0 - eps), (a0 + eps, R)):
        e = graded_edges(lo, hi, feats, h_min=min(h, 1e-3), h_max=h, ratio=0.5)
        x, w = gl_panels(e, 8)
        nodes.append(x)
        weights.append(w)
    z = np.concatenate(nodes)
    wu = np.concatenate(weights) * u(z)
    out = np.empty(s.shape, dtype=complex)
    flat, res = s.ravel(), out.ravel()
    zc = z - a0
    for i in range(0, flat.size, chunk):
        res[i:i + chunk] = np.exp(-1j * np.multiply.outer(flat[i:i + chunk], zc)) @ wu
    return out


def A_Q_n_R(zeta, q, Q, n, R, u, lam0, p: MultiscaleParams, order=16):
    """int_q^Q ds zeta(s) F(s) with s-panels of width pi / max|z - lambda0|."""
    return A_table(zeta, q, [Q], n, R, u, lam0, p, order)[0]


def A_table(zeta, q, Qs, n, R, u, lam0, p: MultiscaleParams, order=16):
    """A(Q, n, R) for every Q in ``Qs`` from one cumulative s-quadrature."""
    if not 0 < q < 1:
        raise ValueError("need 0 < q < 1")
    Qs = sorted(float(Q) for Q in Qs)
    if Qs[0] <= 1:
        raise ValueError("need Q > 1")
    width = math.pi / (R + abs(lam0))
    edges = np.unique(np.concatenate([np.arange(q, Qs[-1], width), Qs, [q]]))
    s, ws = gl_panels(edges, order)
    F = oscillatory_inner(u, lam0, n, R, p, s)
    vals = ws * np.asarray(zeta(s), dtype=complex) * F
    panel_sum = vals.reshape(-1, order).sum(axis=1)
    cum = np.concatenate([[0j], np.cumsum(panel_sum)])
    return [complex(cum[np.searchsorted(edges, Q)]) for Q in Qs]


def A_tail_study(zeta, q, Qs, levels, u, lam0, p: MultiscaleParams):
    """Q |A(2Q) - A(Q)| for every Q and every (n, R) level."""
    Qs = sorted(Qs)
    allQ = sorted(set(Qs) | {2 * Q for Q in Qs})
    rows, products = [], {}
    for n, R in levels:
        A = dict(zip(allQ, A_table(zeta, q, allQ, n, R, u, lam0, p)))
        prod = []
        for Q in Qs:
            tail = abs(A[2 * Q] - A[Q])
            prod.append(Q * tail)
            rows.append({"Q": Q, "n": n, "R": R, "tail": tail, "Q_tail": Q * tail,
                         "A_Q": A[Q]})
        products[(n, R)] = np.array(prod)
    keys = list(products)
    spread = np.zeros(len(Qs))
    for i in range(len(Qs)):
        vals = np.array([products[k][i] for k in keys])
        spread[i] = (vals.max() - vals.min()) / vals.max() if vals.max() > 0 else 0.0
    return {"rows": rows, "products": products, "C": {k: float(v.max()) for k, v in products.items()},
            "relative_spread": spread, "Qs": Qs}


def write_rows(rows, path, columns):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(columns)
        for row in rows:
            out.writerow([_fmt(row[c]) for c in columns])


def _fmt(v):
    if isinstance(v, complex):
        return f"{float(v.real)!r}{float(v.imag):+.17g}j"
    if isinstance(v, float):
        return repr(float(v))
    return v
