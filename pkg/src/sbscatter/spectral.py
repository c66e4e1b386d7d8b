"""Resonances of the dilated Hamiltonian, spectral projectors and resolvents.

H^theta is complex symmetric, so right eigenvectors normalized by the
bilinear form v^T v = 1 give spectral projectors P = v v^T without a
separate left eigenproblem.  Eigenvalues are identified by continuation in
the coupling from g = 0, where they equal the atomic levels.
"""

from __future__ import annotations

import json
import math
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fock import OperatorMatrix
from .hamiltonian import (LOWER, UPPER, ModelParams, apply_sigma1, assemble_free,
                          assemble_full, assemble_interaction, level_index, restrict,
                          sector_of_level)

DENSE_MAX = 1200          # sector dimension up to which dense LAPACK eigensolvers are used
SOLVE_DENSE_MAX = 64      # linear solves switch to SuperLU above this (H is very sparse)
SOLVE_RTOL = 1e-10        # residual target of resolvent solves
SINGULAR_TOL = 1e-13      # relative distance-to-spectrum treated as singular


class NearSingularError(RuntimeError):
    """Resolvent requested too close to the spectrum."""

    def __init__(self, z, distance, msg=""):
        self.z = z
        self.distance = distance
        super().__init__(msg or f"(H - z) is numerically singular at z={z}; "
                                f"estimated distance to spectrum {distance:.3e}")


class TrackingError(RuntimeError):
    """Eigenvalue continuation could not identify a unique branch."""


class QuasiNullError(RuntimeError):
    """Eigenvector with v^T v ~ 0, i.e. a (nearly) defective eigenvalue."""


def _as_sparse(op):
    if isinstance(op, OperatorMatrix):
        return op.mat
    if sp.issparse(op):
        return op
    return sp.csr_matrix(np.asarray(op))


def inf_norm(mat):
    return float(abs(mat).sum(axis=1).max()) if mat.shape[0] else 0.0


class Resolvent:
    """Cached factorizations of (A - z) for a fixed square matrix A.

    Sparse matrices above ``dense_max`` are factored with SuperLU using the
    minimum-degree ordering on A + A^T, which suits the block structure of
    the Fock-space Hamiltonian far better than the default column ordering.
    """

    def __init__(self, mat, dense_max=SOLVE_DENSE_MAX, cache_size=8, rtol=SOLVE_RTOL):
        self.mat = _as_sparse(mat).tocsc()
        self.n = self.mat.shape[0]
        self.dense = self.n <= dense_max
        self._dense_mat = self.mat.toarray() if self.dense else None
        self.rtol = rtol
        self.norm = inf_norm(self.mat)
        self._cache = OrderedDict()
        self._cache_size = cache_size

    def _factor(self, z):
        key = complex(z)
        hit = self._cache.get(key)
        if hit is not None:
            self._cache.move_to_end(key)
            return hit
        try:
            if self.dense:
                a = self._dense_mat - key * np.eye(self.n)
                lu = sla.lu_factor(a, check_finite=False)
                solver = lambda b, lu=lu: sla.lu_solve(lu, b, check_finite=False)
            else:
                a = (self.mat - key * sp.identity(self.n, format="csc")).tocsc()
                lu = spla.splu(a, permc_spec="MMD_AT_PLUS_A")
                solver = lu.solve
        except (RuntimeError, sla.LinAlgError) as exc:
            raise NearSingularError(key, 0.0, f"factorization failed at z={key}: {exc}")
        self._cache[key] = solver
        if len(self._cache) > self._cache_size:
            self._cache.popitem(last=False)
        return solver

    def apply(self, z, x):
        return self.mat @ x - z * x

    def solve(self, z, b):
        """x with (A - z) x = b; residual checked, one refinement step."""
        b = np.asarray(b, dtype=complex)
        solver = self._factor(z)
        x = solver(b)
        bn = np.linalg.norm(b)
        if bn == 0:
            return x
        res = np.linalg.norm(self.apply(z, x) - b)
        if not res <= self.rtol * bn:
            x = x + solver(b - self.apply(z, x))
            res = np.linalg.norm(self.apply(z, x) - b)
        xn = np.linalg.norm(x)
        dist = bn / xn if xn > 0 else float("inf")
        if not np.isfinite(xn) or not res <= self.rtol * bn or dist <= SINGULAR_TOL * max(self.norm, 1.0):
            raise NearSingularError(complex(z), dist)
        return x


class ResolventForm:
    """z -> psi^T (H - z)^{-1} phi for fixed vectors (bilinear, no conjugation).

    If H carries parity labels and both vectors live in one sector, all
    solves are done on that sector.  For |z| beyond ``far_factor`` times the
    infinity norm of H the Neumann series -sum_k psi^T H^k phi / z^(k+1) is
    used instead of a linear solve.
    """

    def __init__(self, op, phi, psi=None, dense_max=SOLVE_DENSE_MAX, far_factor=2.0,
                 n_moments=64):
        phi = np.asarray(phi, dtype=complex)
        psi = phi if psi is None else np.asarray(psi, dtype=complex)
        mat = _as_sparse(op)
        self.full_dim = mat.shape[0]
        idx = None
        parity = getattr(op, "parity", None)
        if parity is not None:
            labels = set(np.unique(parity[np.abs(phi) > 0])) | set(np.unique(parity[np.abs(psi) > 0]))
            if len(labels) == 1:
                idx = np.flatnonzero(parity == labels.pop())
        if idx is not None:
            mat = mat[idx][:, idx]
            phi, psi = phi[idx], psi[idx]
        self.idx = idx
        self.phi, self.psi = phi, psi
        self.resolvent = Resolvent(mat, dense_max=dense_max)
        self.far_radius = far_factor * max(self.resolvent.norm, 1e-300)
        self.n_moments = n_moments
        self._moments = None

    @property
    def moments(self):
        if self._moments is None:
            m = np.empty(self.n_moments, dtype=complex)
            x = self.phi.copy()
            mat = self.resolvent.mat
            for k in range(self.n_moments):
                m[k] = self.psi @ x
                x = mat @ x
            self._moments = m
        return self._moments

    def far(self, z):
        """Neumann-series value, valid for |z| > far_radius."""
        w = 1.0 / np.asarray(z, dtype=complex)
        acc = np.zeros_like(w)
        for mk in self.moments[::-1]:
            acc = acc * w + mk
        return -w * acc

    def solve(self, z):
        """(H - z)^{-1} phi, embedded back into the full space."""
        x = self.resolvent.solve(z, self.phi)
        if self.idx is None:
            return x
        out = np.zeros(self.full_dim, dtype=complex)
        out[self.idx] = x
        return out

    def value(self, z):
        z = complex(z)
        if abs(z) > self.far_radius:
            return complex(self.far(z))
        return complex(self.psi @ self.resolvent.solve(z, self.phi))

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.empty(z.shape, dtype=complex)
        flat = z.ravel()
        res = out.ravel()
        far = np.abs(flat) > self.far_radius
        if far.any():
            res[far] = self.far(flat[far])
        for k in np.flatnonzero(~far):
            res[k] = self.psi @ self.resolvent.solve(flat[k], self.phi)
        return out if z.ndim else complex(out)


def resolvent_solve(H, z, b, dense_max=SOLVE_DENSE_MAX):
    """Solve (H - z) x = b with a residual check ||r|| <= 1e-10 ||b||."""
    return Resolvent(H, dense_max=dense_max).solve(z, b)


# --------------------------------------------------------------------------
# eigenvalue continuation


def bilinear_normalize(v, anchor=None):
    """Scale v so that v^T v = 1; the branch makes v[anchor] have Re > 0."""
    v = np.asarray(v, dtype=complex)
    s = v @ v
    scale = np.vdot(v, v).real
    if abs(s) <= 1e-10 * scale:
        raise QuasiNullError(f"v^T v = {s:.3e} is numerically zero (defective pair?)")
    v = v / np.sqrt(s)
    k = int(np.argmax(np.abs(v))) if anchor is None else anchor
    if v[k].real < 0 or (v[k].real == 0 and v[k].imag < 0):
        v = -v
    return v


def _nearest_eigenpairs(mat, sigma, k, v0, dense_max):
    n = mat.shape[0]
    if n <= dense_max or n <= k + 2:
        vals, vecs = sla.eig(mat.toarray(), check_finite=False)
    else:
        lu = spla.splu((mat - sigma * sp.identity(n, format="csc")).tocsc(),
                       permc_spec="MMD_AT_PLUS_A")
        opinv = spla.LinearOperator((n, n), matvec=lu.solve, dtype=complex)
        vals, vecs = spla.eigs(mat, k=k, sigma=sigma, OPinv=opinv, v0=v0,
                               ncv=min(n, max(2 * k + 1, 24)), tol=1e-14, maxiter=5000)
    order = np.argsort(np.abs(vals - sigma), kind="stable")[:k]
    return vals[order], vecs[:, order]


@dataclass
class TrackStep:
    g: float
    value: complex
    overlap: float
    runner_up: float


def track_eigenvalue(free, inter, g, start_index, steps=4, n_candidates=12,
                     dense_max=DENSE_MAX, tol=1e-10):
    """Continue the eigenpair of free + g' inter from g'=0 to g'=g.

    ``free`` must be diagonal and ``start_index`` selects the unperturbed
    eigenvector.  At every step the candidate with the largest overlap with
    the previous eigenvector is chosen among the eigenvalues nearest to the
    extrapolated value.
    """
    if steps < 4:
        raise ValueError("continuation needs at least 4 steps")
    n = free.shape[0]
    lam = complex(free.diagonal()[start_index])
    v = np.zeros(n, dtype=complex)
    v[start_index] = 1.0
    history = [(0.0, lam)]
    log = []
    if g == 0:
        return lam, v, log
    rng = np.random.default_rng(0)
    jitter = 1e-3 * (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / math.sqrt(n)
    hnorm = inf_norm(free) + g * inf_norm(inter)
    for gk in np.linspace(0.0, g, steps + 1)[1:]:
        mat = (free + gk * inter).tocsc()
        if len(history) >= 2 and history[-1][0] ** 2 > history[-2][0] ** 2:
            (ga, la), (gb, lb) = history[-2], history[-1]
            # eigenvalues are even in g, so extrapolate linearly in g^2
            sigma = lb + (lb - la) * (gk**2 - gb**2) / (gb**2 - ga**2)
        else:
            sigma = lam
        vals, vecs = _nearest_eigenpairs(mat, sigma, min(n_candidates, n), v + jitter,
                                         dense_max)
        ov = np.abs(vecs.conj().T @ v) / (np.linalg.norm(vecs, axis=0) * np.linalg.norm(v))
        order = np.argsort(-ov, kind="stable")
        best = order[0]
        second = ov[order[1]] if len(order) > 1 else 0.0
        close = len(order) > 1 and abs(vals[best] - vals[order[1]]) <= 10 * tol * hnorm
        if ov[best] < 0.5 or (second > 0.8 * ov[best] and second > 0.3) or (close and second > 0.3):
            raise TrackingError(
                f"ambiguous continuation at g={gk:.4g}: overlaps {ov[best]:.3f} vs {second:.3f}; "
                "increase the number of homotopy steps")
        lam = complex(vals[best])
        v = vecs[:, best] / np.linalg.norm(vecs[:, best])
        history.append((gk, lam))
        log.append(TrackStep(float(gk), lam, float(ov[best]), float(second)))
    return lam, v, log


def hermitian_ground_state(p: ModelParams, dense_max=DENSE_MAX):
    """Ground state of the undilated H: (E0, Psi = P_0 (phi_0 x vac), ||Psi||)."""
    H = assemble_full(p, theta=0.0)
    sub, idx = restrict(H, sector_of_level(LOWER))
    sub = sub.real.tocsc()
    loc = int(np.flatnonzero(idx == level_index(p.basis, LOWER))[0])
    n = sub.shape[0]
    if n <= max(dense_max, 3000):
        vals, vecs = sla.eigh(sub.toarray(), subset_by_index=[0, 0])
        e0, v = vals[0], vecs[:, 0]
    else:
        bound = float((sub.diagonal() - (abs(sub).sum(axis=1).A1 - abs(sub.diagonal()))).min())
        sigma = bound - 1e-3
        lu = spla.splu((sub - sigma * sp.identity(n, format="csc")).tocsc(),
                       permc_spec="MMD_AT_PLUS_A")
        opinv = spla.LinearOperator((n, n), matvec=lu.solve, dtype=float)
        v0 = np.zeros(n)
        v0[loc] = 1.0
        vals, vecs = spla.eigsh(sub, k=1, sigma=sigma, OPinv=opinv, v0=v0 + 1e-3, tol=1e-14)
        e0, v = vals[0], vecs[:, 0]
    v = v / np.linalg.norm(v)
    if v[loc] < 0:
        v = -v
    psi = np.zeros(H.dim)
    psi[idx] = v * v[loc]
    return float(e0), psi, float(abs(v[loc]))


@dataclass
class ResonanceData:
    """Tracked eigenpairs of H^theta and the associated dilated eigenstates."""

    lam0: complex | None
    lam1: complex | None
    v0: np.ndarray | None = field(default=None, repr=False)
    v1: np.ndarray | None = field(default=None, repr=False)
    psi0: np.ndarray | None = field(default=None, repr=False)
    psi1: np.ndarray | None = field(default=None, repr=False)
    norm0: float | None = None
    e0_hermitian: float | None = None
    residuals: dict = field(default_factory=dict)
    g: float = 0.0
    theta: complex = 0j
    e1: float = 1.0
    dim: int = 0
    tracks: dict = field(default_factory=dict, repr=False)

    def eigenvalue(self, level):
        return self.lam0 if level == LOWER else self.lam1

    def eigenvector(self, level):
        return self.v0 if level == LOWER else self.v1

    @property
    def phi(self):
        """sigma_1 Psi_0^theta, the vector entering u(z) and the kernel."""
        return apply_sigma1(self.psi0)

    def to_dict(self):
        def c(z):
            return None if z is None else [float(np.real(z)), float(np.imag(z))]
        return {
            "lambda0": c(self.lam0),
            "lambda1": c(self.lam1),
            "norm0": self.norm0,
            "e0_hermitian": self.e0_hermitian,
            "residuals": {str(k): float(v) for k, v in self.residuals.items()},
            "g": self.g,
            "theta": c(self.theta),
            "e1": self.e1,
            "dim": self.dim,
            "flags": {
                "im_lambda1_nonpositive": None if self.lam1 is None else bool(np.imag(self.lam1) <= 1e-12),
                "im_lambda0_small": None if self.lam0 is None else bool(abs(np.imag(self.lam0)) <= 1e-6),
            },
        }

    def to_json(self, path=None, **kw):
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True, **kw)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def eigen_resonances(p: ModelParams, levels=(LOWER, UPPER), steps=4, with_norm=True,
                     dense_max=DENSE_MAX, tol=1e-10):
    """Ground-state eigenvalue lambda_0 and resonance lambda_1 of H^theta.

    Each level is continued from g=0 inside its parity sector.  Returned
    eigenvectors satisfy v^T v = 1.
    """
    free = assemble_free(p)
    inter = assemble_interaction(p)
    basis = p.basis
    rd = ResonanceData(None, None, g=p.g, theta=p.theta.value, e1=p.e1, dim=2 * basis.dim)
    for level in levels:
        fsub, idx = restrict(free, sector_of_level(level))
        vsub, _ = restrict(inter, sector_of_level(level))
        loc = int(np.flatnonzero(idx == level_index(basis, level))[0])
        lam, v, log = track_eigenvalue(fsub, vsub, p.g, loc, steps=steps,
                                       dense_max=dense_max, tol=tol)
        mat = (fsub + p.g * vsub).tocsc()
        res = np.linalg.norm(mat @ v - lam * v) / np.linalg.norm(v)
        hnorm = inf_norm(mat)
        if res > tol * max(hnorm, 1.0) and p.g != 0:
            lam, v = _refine(mat, lam, v)
            res = np.linalg.norm(mat @ v - lam * v) / np.linalg.norm(v)
        v = bilinear_normalize(v, anchor=loc)
        full = np.zeros(2 * basis.dim, dtype=complex)
        full[idx] = v
        target = np.zeros_like(full)
        target[level_index(basis, level)] = 1.0
        psi = project(full, target)
        rd.residuals[f"lambda{level}"] = float(res / max(hnorm, 1.0))
        rd.tracks[level] = log
        if level == LOWER:
            rd.lam0, rd.v0, rd.psi0 = lam, full, psi
        else:
            rd.lam1, rd.v1, rd.psi1 = lam, full, psi
    if with_norm and LOWER in levels:
        e0, _, norm0 = hermitian_ground_state(p, dense_max=dense_max)
        rd.e0_hermitian, rd.norm0 = e0, norm0
    return rd


def _refine(mat, lam, v, iters=3):
    """Inverse iteration with Rayleigh-quotient update (bilinear form)."""
    n = mat.shape[0]
    shift = lam + 1e-12 * (1 + abs(lam))
    lu = spla.splu((mat - shift * sp.identity(n, format="csc")).tocsc(),
                   permc_spec="MMD_AT_PLUS_A")
    for _ in range(iters):
        v = lu.solve(v)
        v /= np.linalg.norm(v)
    lam = complex((v @ (mat @ v)) / (v @ v))
    return lam, v


def project(v, x):
    """P x with P = v v^T / (v^T v); invariant under v -> c v."""
    v = np.asarray(v, dtype=complex)
    s = v @ v
    if abs(s) <= 1e-10 * np.vdot(v, v).real:
        raise QuasiNullError("v^T v vanishes; projector undefined")
    return v * ((v @ x) / s)


def dilated_eigenstate(rd: ResonanceData, level, target=None):
    """Psi_i^theta = P_i^theta target, by default target = phi_i x vacuum."""
    v = rd.eigenvector(level)
    if v is None:
        raise ValueError(f"level {level} was not computed")
    if target is None:
        half = v.shape[0] // 2
        target = np.zeros_like(v)
        target[0 if level == UPPER else half] = 1.0
    return project(v, target)


def u_form(rd: ResonanceData, H, **kw):
    """Reusable evaluator z -> u(z) on the given (dilated) Hamiltonian."""
    return ResolventForm(H, rd.phi, **kw)


def u_of_z(rd: ResonanceData, H, z, form=None):
    """u(z) = (sigma_1 Psi_0)^T (H - z)^{-1} (sigma_1 Psi_0)."""
    form = u_form(rd, H) if form is None else form
    return form(z)


def u_tilde(rd: ResonanceData, H, x, form=None, route="conjugate", H_bar=None):
    """Bilinear matrix element of the resolvent of H^{conj theta} at real x.

    ``route="conjugate"`` uses conj(u(conj x)) computed on H^theta;
    ``route="assemble"`` solves with the separately assembled H^{conj theta}
    and the conjugate eigenstate.
    """
    if route == "conjugate":
        form = u_form(rd, H) if form is None else form
        return np.conj(form(np.conj(np.asarray(x, dtype=complex))))
    if route == "assemble":
        if H_bar is None:
            raise ValueError("route='assemble' needs H_bar")
        bar = ResolventForm(H_bar, np.conj(rd.phi)) if form is None else form
        return bar(x)
    raise ValueError(f"unknown route {route!r}")


def theta_diagnostics(p: ModelParams, thetas, tol=1e-6, **kw):
    """Trajectory of lambda_1 over a list of dilation parameters."""
    thetas = [complex(t) for t in thetas]
    if len(thetas) < 3:
        raise ValueError("need at least 3 dilation values")
    lam = []
    for th in thetas:
        rd = eigen_resonances(p.replace(theta=th), levels=(UPPER,), with_norm=False, **kw)
        lam.append(rd.lam1)
    lam = np.array(lam)
    x = np.array([t.imag for t in thetas])
    deriv = np.abs(np.gradient(lam, x)) if len(set(x)) == len(x) else np.zeros(len(x))
    spread = float(np.max(np.abs(lam - lam.mean())))
    k = int(np.argmin(deriv))
    return {
        "theta": thetas,
        "lambda1": lam,
        "derivative": deriv,
        "theta_star": thetas[k],
        "spread": spread,
        "stationary": spread <= tol,
        "im_negative": [bool(z.imag < 0) for z in lam],
    }


# --------------------------------------------------------------------------
# spectral regions


@dataclass(frozen=True)
class SpectralRegions:
    """Regions A, B_i^(1) and cones C_m used in the resolvent estimates."""

    e1: float
    nu: float
    rho1: float
    m: int = 4
    e0: float = 0.0

    def __post_init__(self):
        if self.m < 4:
            raise ValueError("cone aperture parameter m must be >= 4")

    @property
    def delta(self):
        return self.e1 - self.e0

    def in_A(self, z):
        z = np.asarray(z, dtype=complex)
        d = self.delta
        a1 = z.real < self.e0 - d / 2
        a2 = z.imag > d * math.sin(self.nu) / 8
        a3 = (z.real > self.e1 + d / 2) & (z.imag >= -math.sin(self.nu / 2) * (z.real - (self.e1 + d / 2)))
        return a1 | a2 | a3

    def in_B(self, level, z):
        z = np.asarray(z, dtype=complex)
        ei = self.e1 if level == UPPER else self.e0
        d = self.delta
        return ((np.abs(z.real - ei) <= d / 2)
                & (z.imag >= -0.5 * self.rho1 * math.sin(self.nu))
                & (z.imag <= d * math.sin(self.nu) / 8))

    def in_cone(self, apex, z, atol=1e-12):
        z = np.asarray(z, dtype=complex)
        w = z - apex
        at_apex = np.abs(w) <= atol
        alpha = -np.angle(np.where(at_apex, 1.0, w))
        return at_apex | (np.abs(alpha - self.nu) <= self.nu / self.m + 1e-12)


def region_check(rd: ResonanceData, sr: SpectralRegions, spectrum):
    """Check that no eigenvalue falls in the claimed resolvent set."""
    z = np.asarray(spectrum, dtype=complex)
    lam0 = rd.lam0 if rd.lam0 is not None else sr.e0
    lam1 = rd.lam1 if rd.lam1 is not None else sr.e1
    forbidden = (sr.in_A(z)
                 | (sr.in_B(LOWER, z) & ~sr.in_cone(lam0, z))
                 | (sr.in_B(UPPER, z) & ~sr.in_cone(lam1, z)))
    return {
        "allowed": ~forbidden,
        "n_violations": int(forbidden.sum()),
        "lambda0_in_B0": bool(sr.in_B(LOWER, lam0)),
        "lambda1_in_B1": bool(sr.in_B(UPPER, lam1)),
    }


def full_spectrum(H):
    """All eigenvalues of H (dense, per parity sector when labels exist)."""
    if isinstance(H, OperatorMatrix) and H.parity is not None:
        out = []
        for label in (0, 1):
            sub, _ = restrict(H, label)
            out.append(sla.eigvals(sub.toarray()))
        return np.concatenate(out)
    return sla.eigvals(_as_sparse(H).toarray())
