"""The contour Gamma(eps, R) and the Laplace representation of the propagator.

Gamma is the concatenation, in this order, of

* the left ray  z = -R - u e^{i nu/4},  u from u_max down to 0,
* the real segment [-R, lambda0 - eps],
* the half circle z = lambda0 - eps e^{-i t}, t in [0, pi], passing above lambda0,
* the real segment [lambda0 + eps, R],
* the right ray z = R + u e^{-i nu/4}, u from 0 to u_max.

For t > 0,  <phi, e^{-itH} psi> = (1/2 pi i) int_Gamma e^{-itz} psi^T (H^theta - z)^{-1} phi dz.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .hamiltonian import LOWER, UPPER, ModelParams, apply_sigma1, assemble_full, restrict, sector_of_level
from .spectral import ResolventForm, eigen_resonances, hermitian_ground_state

T_MIN = 0.1
DAMPING_DECADES = 12.0


def ray_length(t, nu):
    """u_max with exp(-t u sin(nu/4)) = 10^-12."""
    if t < T_MIN:
        raise ValueError(f"t must be >= {T_MIN}")
    return DAMPING_DECADES * math.log(10.0) / (t * math.sin(nu / 4.0))


def gl_panels(edges, n):
    x, w = np.polynomial.legendre.leggauss(n)
    edges = np.asarray(edges, dtype=float)
    a, b = edges[:-1, None], edges[1:, None]
    return ((0.5 * (a + b) + 0.5 * (b - a) * x).ravel(),
            (0.5 * (b - a) * w).ravel())


def graded_edges(a, b, features=(), h_min=0.01, h_max=0.25, ratio=0.5):
    """Panel edges on [a, b] with width ~ ratio * distance to the nearest feature."""
    feats = np.asarray([f for f in features if np.isfinite(f)], dtype=float)
    edges = [a]
    x = a
    while x < b:
        d = np.min(np.abs(feats - x)) if feats.size else np.inf
        h = min(max(ratio * d, h_min), h_max)
        x = min(x + h, b)
        if b - x < 0.25 * h:
            x = b
        edges.append(x)
    return np.array(edges)


@dataclass(frozen=True)
class Segment:
    kind: str               # "ray", "line" or "arc"
    start: complex
    end: complex
    data: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Contour:
    """Oriented chain of segments with complex dz quadrature weights."""

    segments: tuple
    nodes: np.ndarray
    weights: np.ndarray
    labels: np.ndarray      # segment index of every node

    def integrate(self, f):
        return complex(np.sum(self.weights * f(self.nodes)))

    def is_connected(self, tol=1e-12):
        return all(abs(s.end - n.start) <= tol for s, n in zip(self.segments, self.segments[1:]))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["segment", "kind", "re_z", "im_z", "re_w", "im_w"])
            for lab, z, w in zip(self.labels, self.nodes, self.weights):
                out.writerow([int(lab), self.segments[lab].kind, repr(float(z.real)),
                              repr(float(z.imag)), repr(float(w.real)), repr(float(w.imag))])


def _ray(start, direction, u_max, n, t_max):
    width = min(2.0, 1.25 / t_max)
    head = np.geomspace(1e-2, min(1.0, u_max), 5) - 1e-2
    body = np.arange(head[-1], u_max, width)
    edges = np.unique(np.concatenate([head, body, [u_max]]))
    u, w = gl_panels(edges, n)
    return start + u * direction, w * direction


def build_gamma(eps, R, nu, lam0, t=None, u_max=None, n=8, features=(), h_max=0.25,
                h_min=0.01, t_max=None, arc_panels=8, detours=()):
    """Assemble Gamma(eps, R) with Gauss-Legendre panels on every piece.

    The rays end at ``u_max``; by default it is fixed by the damping of
    e^{-itz} at time ``t``.  ``features`` are real abscissae (thresholds,
    Re lambda_1) near which the real segments are refined.  Each point in
    ``detours`` is bypassed by an upper half-circle of radius ``eps``; this
    is needed when a pole of the integrand sits on the real axis (g = 0).
    """
    lam0 = complex(lam0)
    a0 = lam0.real
    if not 0 < nu < math.pi / 16:
        raise ValueError("nu must lie in (0, pi/16)")
    if eps <= 0 or eps >= R - abs(lam0):
        raise ValueError("need 0 < eps < R - |lambda0|")
    if u_max is None:
        if t is None:
            raise ValueError("give t or u_max")
        u_max = ray_length(t, nu)
    t_max = t_max or (t if t is not None else 1.0)
    feats = [a0, *features]
    segs, nodes, weights, labels = [], [], [], []

    def add(seg, z, w):
        labels.append(np.full(z.size, len(segs)))
        segs.append(seg)
        nodes.append(np.asarray(z, dtype=complex))
        weights.append(np.asarray(w, dtype=complex))

    e_left = np.exp(1j * nu / 4)
    z, w = _ray(-R + 0j, -e_left, u_max, n, t_max)
    # traversed inwards: reverse orientation
    add(Segment("ray", -R - u_max * e_left, -R + 0j, {"direction": -e_left, "u_max": u_max}),
        z[::-1], -w[::-1])
    centers = sorted({a0, *(float(d) for d in detours)})
    if np.any(np.diff(centers) <= 2 * eps) or centers[0] - eps <= -R or centers[-1] + eps >= R:
        raise ValueError("detour arcs overlap each other or the ends of [-R, R]")
    tt, wt = gl_panels(np.linspace(0.0, math.pi, arc_panels + 1), n)
    left = -R
    for c0 in centers:
        edges = graded_edges(left, c0 - eps, feats, h_min=h_min, h_max=h_max)
        x, w = gl_panels(edges, n)
        add(Segment("line", complex(left), complex(c0 - eps)), x, w)
        za = c0 - eps * np.exp(-1j * tt)
        add(Segment("arc", complex(c0 - eps), complex(c0 + eps), {"center": c0, "radius": eps}),
            za, 1j * eps * np.exp(-1j * tt) * wt)
        left = c0 + eps
    edges = graded_edges(left, R, feats, h_min=h_min, h_max=h_max)
    x, w = gl_panels(edges, n)
    add(Segment("line", complex(left), R + 0j), x, w)
    e_right = np.exp(-1j * nu / 4)
    z, w = _ray(R + 0j, e_right, u_max, n, t_max)
    add(Segment("ray", R + 0j, R + u_max * e_right, {"direction": e_right, "u_max": u_max}), z, w)
    return Contour(tuple(segs), np.concatenate(nodes), np.concatenate(weights),
                   np.concatenate(labels))


def circle_contour(center, radius, n=16, panels=8):
    """Closed counter-clockwise circle, used for Cauchy-closure checks."""
    tt, wt = gl_panels(np.linspace(0.0, 2 * math.pi, panels + 1), n)
    z = center + radius * np.exp(1j * tt)
    w = 1j * radius * np.exp(1j * tt) * wt
    seg = Segment("arc", center + radius, center + radius, {"center": center, "radius": radius})
    return Contour((seg,), z, w, np.zeros(z.size, dtype=int))


class MemoForm:
    """Memoizing wrapper so that shared contour nodes are solved once."""

    def __init__(self, form):
        self.form = form
        self._memo = {}

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        flat = z.ravel()
        new = [c for c in dict.fromkeys(flat.tolist()) if c not in self._memo]
        if new:
            vals = self.form(np.array(new, dtype=complex))
            self._memo.update(zip(new, np.atleast_1d(vals).tolist()))
        return np.array([self._memo[c] for c in flat.tolist()]).reshape(z.shape)


def laplace_propagator(form, t, contour: Contour):
    """(1/2 pi i) sum_k w_k e^{-i t z_k} F(z_k) for F(z) = psi^T (H - z)^{-1} phi."""
    if t < T_MIN:
        raise ValueError(f"t must be >= {T_MIN}")
    vals = form(contour.nodes)
    return complex(np.sum(contour.weights * np.exp(-1j * t * contour.nodes) * vals) / (2j * math.pi))


class HermitianPropagator:
    """Dense eigendecomposition of the undilated H on one parity sector."""

    def __init__(self, H, label=None, max_dim=8000):
        mat = H.mat if hasattr(H, "mat") else H
        if label is not None:
            mat, idx = restrict(H, label)
        else:
            idx = np.arange(mat.shape[0])
        if mat.shape[0] > max_dim:
            raise MemoryError(f"dimension {mat.shape[0]} too large for the dense path; "
                              "use a Krylov propagator instead")
        dense = mat.toarray()
        if np.abs(dense.imag).max() == 0:
            dense = dense.real
        self.idx = idx
        self.energies, self.vectors = sla.eigh(dense)

    def weights(self, phi, psi=None):
        """Spectral weights conj(<E|phi>) <E|psi> restricted to the sector."""
        a = self.vectors.T @ np.asarray(phi)[self.idx]
        b = a if psi is None else self.vectors.T @ np.asarray(psi)[self.idx]
        return np.conj(a) * b

    def matrix_element(self, phi, psi, t):
        """<phi, e^{-itH} psi>, vectorized over t."""
        c = self.weights(phi, psi)
        t = np.asarray(t, dtype=float)
        return np.exp(-1j * np.multiply.outer(t, self.energies)) @ c


def direct_propagator(phi, psi, t, H=None, propagator=None):
    """<phi, e^{-itH} psi> from the Hermitian eigendecomposition of H."""
    prop = propagator if propagator is not None else HermitianPropagator(H)
    return complex(prop.matrix_element(phi, psi, t))


@dataclass
class LaplaceSetup:
    """Everything needed to compare both sides of the Laplace identity."""

    params: ModelParams
    rd: object
    form: MemoForm
    propagator: HermitianPropagator
    phi_real: np.ndarray


def laplace_setup(p: ModelParams, dense_max=None):
    rd = eigen_resonances(p, levels=(LOWER,))
    H = assemble_full(p)
    kw = {} if dense_max is None else {"dense_max": dense_max}
    form = MemoForm(ResolventForm(H, rd.phi, **kw))
    _, psi_real, _ = hermitian_ground_state(p)
    phi_real = apply_sigma1(psi_real)
    H0 = assemble_full(p, theta=0.0)
    prop = HermitianPropagator(H0, label=sector_of_level(UPPER))
    return LaplaceSetup(p, rd, form, prop, phi_real)


def laplace_identity_defect(setup: LaplaceSetup, t, eps=0.1, R=8.0, n=8, features=None,
                            detours=None):
    """|contour value - direct value| / (||phi|| ||psi||) for phi = psi = sigma_1 Psi_lambda0.

    By default the atomic level e1 is bypassed from above when g = 0, where
    it is a real pole of the integrand.
    """
    p = setup.params
    rd = setup.rd
    feats = [0.0, p.e1] if features is None else features
    if detours is None:
        detours = [p.e1] if p.g == 0 else []
    c = build_gamma(eps, R, p.theta.nu, rd.lam0, t=t, n=n, features=feats, t_max=max(t, 1.0),
                    detours=detours)
    lhs = laplace_propagator(setup.form, t, c)
    rhs = direct_propagator(setup.phi_real, setup.phi_real, t, propagator=setup.propagator)
    scale = np.linalg.norm(setup.phi_real) ** 2
    return {"t": t, "contour": lhs, "direct": rhs, "defect": abs(lhs - rhs) / scale,
            "nodes": c.nodes.size, "n": n}
