"""Radial momentum grids, the boson form factor and its dilated family.

Momenta enter only through |k|, so the boson modes are labelled by radial
quadrature nodes r_j with weights w_j.  The angular integral is folded into
the effective coupling ``sqrt(4 pi) r_j sqrt(w_j) f(r_j)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

# exp(-r_max^2 / Lambda^2) < 1e-12 at the default upper edge
UV_DECADES = 12.0


def default_r_max(cutoff):
    return cutoff * math.sqrt(UV_DECADES * math.log(10.0)) * 1.0001


def _panels(edges, n):
    x, w = np.polynomial.legendre.leggauss(n)
    edges = np.asarray(edges, dtype=float)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (a + b) + 0.5 * (b - a) * x[None, :]
    weights = 0.5 * (b - a) * w[None, :]
    return nodes.ravel(), weights.ravel()


@dataclass(frozen=True)
class RadialGrid:
    """Quadrature nodes and weights on a radial window [r_min, r_max]."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.nodes, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if r.ndim != 1 or r.shape != w.shape or r.size == 0:
            raise ValueError("nodes and weights must be equal-length 1-d arrays")
        if np.any(r <= 0):
            raise ValueError("radial nodes must be > 0 (k = 0 is excluded)")
        if np.any(np.diff(r) <= 0):
            raise ValueError("radial nodes must be strictly increasing")
        if np.any(w <= 0):
            raise ValueError("quadrature weights must be positive")
        r.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "nodes", r)
        object.__setattr__(self, "weights", w)

    @property
    def M(self):
        return self.nodes.size

    def __len__(self):
        return self.nodes.size

    @property
    def spacing(self):
        """Largest gap between consecutive nodes."""
        if self.M < 2:
            return float("inf")
        return float(np.max(np.diff(self.nodes)))

    @classmethod
    def gauss_legendre(cls, r_min, r_max, M):
        """Plain M-point Gauss-Legendre rule on [r_min, r_max]."""
        if not 0 < r_min < r_max:
            raise ValueError("need 0 < r_min < r_max")
        return cls(*_panels([r_min, r_max], int(M)))

    @classmethod
    def composite(cls, edges, nodes_per_panel):
        """Gauss-Legendre panels between consecutive ``edges``."""
        edges = np.asarray(edges, dtype=float)
        if edges[0] <= 0 or np.any(np.diff(edges) <= 0):
            raise ValueError("panel edges must be positive and increasing")
        return cls(*_panels(edges, int(nodes_per_panel)))

    @classmethod
    def graded(cls, r_min, r_max, M, scale=1.0, nodes_per_panel=3):
        """Composite rule refined geometrically towards the infrared.

        Panels are geometric on [r_min, 0.1*scale], uniform on
        [0.1*scale, 2.5*scale] and geometric again out to r_max, where the
        form factor is already negligible.  ``M`` is rounded down to a
        multiple of ``nodes_per_panel``.
        """
        n = int(nodes_per_panel)
        panels = int(M) // n
        if panels < 6:
            raise ValueError("graded grid needs at least 6 panels")
        knee = min(0.1 * scale, 0.5 * (r_min + r_max))
        core = min(2.5 * scale, r_max)
        n_ir = max(2, round(0.15 * panels))
        n_uv = max(2, round(0.15 * panels)) if core < r_max else 0
        n_core = panels - n_ir - n_uv
        if knee <= r_min:
            edges = list(np.linspace(r_min, core, n_ir + n_core + 1))
        else:
            edges = list(np.geomspace(r_min, knee, n_ir + 1))
            edges += list(np.linspace(knee, core, n_core + 1)[1:])
        if n_uv:
            edges += list(np.geomspace(core, r_max, n_uv + 1)[1:])
        return cls.composite(edges, n)

    @classmethod
    def from_rule(cls, r_min, r_max, M, rule="graded", scale=1.0):
        if rule in ("gauss-legendre", "gl"):
            return cls.gauss_legendre(r_min, r_max, M)
        if rule == "graded":
            return cls.graded(r_min, r_max, M, scale=scale)
        raise ValueError(f"unknown grid rule {rule!r}")

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["r", "w"])
            for r, w in zip(self.nodes, self.weights):
                out.writerow([repr(float(r)), repr(float(w))])

    @classmethod
    def from_csv(cls, path):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1])


@dataclass(frozen=True)
class DilationParam:
    """Complex dilation parameter theta = re + 1j*im.

    Construction accepts any |im| < pi/16 so that conjugate and real
    parameters can be represented; ``in_strip`` tests membership in the
    admissible set with a lower bound ``nu_min`` on the imaginary part.
    """

    re: float = 0.0
    im: float = 0.0

    def __post_init__(self):
        if not abs(self.re) < 1e-3:
            raise ValueError(f"|Re theta| must be < 1e-3, got {self.re}")
        if not abs(self.im) < math.pi / 16:
            raise ValueError(f"|Im theta| must be < pi/16, got {self.im}")

    @classmethod
    def coerce(cls, theta):
        if isinstance(theta, cls):
            return theta
        z = complex(theta)
        return cls(z.real, z.imag)

    @property
    def value(self):
        return complex(self.re, self.im)

    @property
    def nu(self):
        return self.im

    @property
    def is_real(self):
        return self.im == 0.0

    def conjugate(self):
        return DilationParam(self.re, -self.im)

    def in_strip(self, nu_min=0.0):
        return abs(self.re) < 1e-3 and nu_min < self.im < math.pi / 16


@dataclass(frozen=True)
class FormFactorParams:
    """Ultraviolet cutoff ``cutoff`` (Lambda) and infrared exponent ``mu``."""

    cutoff: float = 1.0
    mu: float = 0.25

    def __post_init__(self):
        if not self.cutoff > 0:
            raise ValueError("cutoff must be > 0")
        if not 0 < self.mu < 0.5:
            raise ValueError(f"mu must lie in (0, 1/2), got {self.mu}")


def _radius(r):
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("form factor is defined for r > 0 only")
    return r


def _out(x, like):
    return x.item() if np.ndim(like) == 0 else x


def form_factor(r, p: FormFactorParams):
    """exp(-r^2/Lambda^2) * r^(-1/2 + mu)."""
    rr = _radius(r)
    val = np.exp(-(rr / p.cutoff) ** 2) * rr ** (p.mu - 0.5)
    return _out(val, r)


def dilated_dispersion(theta, r):
    """omega^theta(r) = exp(-theta) r."""
    th = DilationParam.coerce(theta).value
    rr = _radius(r)
    return _out(np.exp(-th) * rr, r)


def dilated_form_factor(theta, r, p: FormFactorParams, literal=False):
    """Analytically continued form factor at complex dilation ``theta``.

    The default continues r -> exp(-theta) r together with the Jacobian
    factor exp(-3 theta / 2), which gives
    exp(-theta(1+mu)) exp(-exp(-2 theta) r^2/Lambda^2) r^(-1/2+mu).
    ``literal=True`` uses exp(+2 theta) in the Gaussian instead; that variant
    does not commute with the dilation of the dispersion, so eigenvalues then
    drift with theta.
    """
    th = DilationParam.coerce(theta).value
    rr = _radius(r)
    s = 2.0 if literal else -2.0
    val = (np.exp(-th * (1.0 + p.mu)) * np.exp(-np.exp(s * th) * (rr / p.cutoff) ** 2)
           * rr ** (p.mu - 0.5))
    return _out(val, r)


def effective_coupling(grid: RadialGrid, theta, p: FormFactorParams, literal=False):
    """Mode couplings c_j = sqrt(4 pi) r_j sqrt(w_j) f^theta(r_j)."""
    f = dilated_form_factor(theta, grid.nodes, p, literal=literal)
    return np.sqrt(4.0 * np.pi) * grid.nodes * np.sqrt(grid.weights) * f
