"""Boundary geometry of polynomial defining-function domains.

Points are complex numpy arrays of shape ``(n,)``. Real coordinates, where
needed, are ordered ``(x_1..x_n, y_1..y_n)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
from scipy.spatial.distance import pdist

from .errors import (
    DegenerateGradient,
    NoConvergence,
    OutsideCollar,
    PreconditionError,
    SliceNotNondegenerate,
)
from .polynomial import CompiledPolynomial, Polynomial, real_hessian, to_complex, to_real

TOL_LEVI = 1e-8


@dataclass
class DomainSpec:
    """Bounded domain ``{rho < 0} ∩ bbox`` with a validated collar width."""

    name: str
    rho: CompiledPolynomial
    bbox_min: np.ndarray
    bbox_max: np.ndarray
    collar_eta0: float
    diameter: float
    # affine chart for slices: ambient point = origin + frame @ w
    origin: Optional[np.ndarray] = None
    frame: Optional[np.ndarray] = None
    parent: Optional["DomainSpec"] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.rho.n

    @property
    def polynomial(self) -> Polynomial:
        return self.rho.poly


@dataclass
class HNSplit:
    v_h: np.ndarray
    v_n: np.ndarray
    base: np.ndarray
    normal: np.ndarray


@dataclass
class LeviSpectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns are unit complex tangent vectors
    classification: str  # "pseudoconvex", "non-pseudoconvex" or "marginal"


def hinner(u, v) -> complex:
    """Hermitian product <u, v> = sum u_j conj(v_j)."""
    return np.sum(np.asarray(u) * np.conj(v), axis=-1)


def real_gradient(g: np.ndarray) -> np.ndarray:
    """Real gradient (as a complex vector) from d rho/dz: grad_R = 2 conj(g)."""
    return 2 * np.conj(g)


def in_bbox(domain: DomainSpec, z) -> np.ndarray:
    x = to_real(z)
    return np.all((x >= domain.bbox_min) & (x <= domain.bbox_max), axis=-1)


def contains(domain: DomainSpec, z) -> np.ndarray | bool:
    z = np.asarray(z, dtype=complex)
    inside = (domain.rho.eval(z) < 0) & in_bbox(domain, z)
    return bool(inside) if inside.ndim == 0 else inside


def _newton_lagrange(domain: DomainSpec, x0: np.ndarray, w: np.ndarray, max_iter: int, tol: float):
    rho = domain.rho
    m = x0.size

    def residual(w, mu):
        val, g = rho.value_and_grad(to_complex(w))
        gr = to_real(real_gradient(g))
        return np.concatenate([w - x0 + mu * gr, [val]]), gr

    val, g = rho.value_and_grad(to_complex(w))
    gr = to_real(real_gradient(g))
    mu = -np.dot(w - x0, gr) / np.dot(gr, gr)
    F, gr = residual(w, mu)
    for _ in range(max_iter):
        fn = np.linalg.norm(F)
        if fn < tol:
            return w, mu, gr
        _, g, h, lv = rho.all_derivatives(to_complex(w))
        H = real_hessian(h, lv)
        J = np.zeros((m + 1, m + 1))
        J[:m, :m] = np.eye(m) + mu * H
        J[:m, m] = gr
        J[m, :m] = gr
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(J, -F, rcond=None)[0]
        t = 1.0
        while t > 1e-6:
            w2, mu2 = w + t * step[:m], mu + t * step[m]
            F2, gr2 = residual(w2, mu2)
            if np.linalg.norm(F2) < (1 - 1e-4 * t) * fn:
                break
            t *= 0.5
        w, mu, F, gr = w2, mu2, F2, gr2
    if np.linalg.norm(F) < tol:
        return w, mu, gr
    raise NoConvergence(f"boundary projection residual {np.linalg.norm(F):.3e} after {max_iter} iterations")


def boundary_project(domain: DomainSpec, z, max_iter: int = 100, tol: float = 1e-10,
                     check_collar: bool = True) -> tuple[np.ndarray, float]:
    """Nearest boundary point ``p`` of a collar point ``z`` and the distance ``|z - p|``.

    Damped Newton on the stationarity system ``w - z + mu grad rho(w) = 0``,
    ``rho(w) = 0``, seeded by one gradient-flow step.
    """
    z = np.asarray(z, dtype=complex)
    x0 = to_real(z)
    val, g = domain.rho.value_and_grad(z)
    gr = to_real(real_gradient(g))
    gn = np.linalg.norm(gr)
    if gn < 1e-12 or (check_collar and abs(val) / gn > 2 * domain.collar_eta0):
        raise OutsideCollar(f"point {z} is not in the collar of {domain.name}")
    w = x0 - val * gr / gn**2
    w, _, gr = _newton_lagrange(domain, x0, w, max_iter, tol)
    p = to_complex(w)
    delta = float(np.linalg.norm(w - x0))
    if check_collar and delta >= domain.collar_eta0:
        raise OutsideCollar(f"distance {delta:.3g} exceeds collar width {domain.collar_eta0:.3g}")
    return p, delta


def signed_distance(domain: DomainSpec, z) -> float:
    z = np.asarray(z, dtype=complex)
    _, delta = boundary_project(domain, z)
    return -delta if domain.rho.eval(z) < 0 else delta


def boundary_distance(domain: DomainSpec, z) -> float:
    return boundary_project(domain, z)[1]


def inner_normal(domain: DomainSpec, p, check: bool = True) -> np.ndarray:
    p = np.asarray(p, dtype=complex)
    val, g = domain.rho.value_and_grad(p)
    if check and abs(val) > 1e-8:
        raise PreconditionError(f"rho(p) = {val:.3e}; p is not a boundary point")
    gn = np.linalg.norm(g)
    if gn < 1e-12:
        raise DegenerateGradient(f"gradient vanishes at {p}")
    return -np.conj(g) / gn


def normal_field(domain: DomainSpec, z) -> np.ndarray:
    """Inner unit normal of the level set through ``z`` (vectorised, no checks)."""
    g = domain.rho.grad_z(z)
    return -np.conj(g) / np.linalg.norm(g, axis=-1, keepdims=True)


def split_hn(domain: DomainSpec, z, v) -> HNSplit:
    p, _ = boundary_project(domain, z)
    nu = inner_normal(domain, p, check=False)
    v = np.asarray(v, dtype=complex)
    v_n = hinner(v, nu) * nu
    return HNSplit(v_h=v - v_n, v_n=v_n, base=p, normal=nu)


def levi_form(domain: DomainSpec, p, v) -> float:
    L = domain.rho.levi_matrix(p)
    v = np.asarray(v, dtype=complex)
    return float(np.real(v @ L @ np.conj(v)))


def complex_tangent_basis(g: np.ndarray) -> np.ndarray:
    """Orthonormal basis (columns) of ``{v : sum g_j v_j = 0}``."""
    return scipy.linalg.null_space(np.asarray(g, dtype=complex)[None, :])


def tangent_levi_spectrum(domain: DomainSpec, p, tol_levi: float = TOL_LEVI) -> LeviSpectrum:
    p = np.asarray(p, dtype=complex)
    _, g, _, L = domain.rho.all_derivatives(p)
    if np.linalg.norm(g) < 1e-12:
        raise DegenerateGradient(f"gradient vanishes at {p}")
    E = complex_tangent_basis(g)
    Q = E.conj().T @ np.conj(L) @ E
    Q = 0.5 * (Q + Q.conj().T)
    w, c = np.linalg.eigh(Q)
    vecs = E @ c
    if w[0] < -tol_levi:
        cls = "non-pseudoconvex"
    elif w[0] <= tol_levi:
        cls = "marginal"
    else:
        cls = "pseudoconvex"
    return LeviSpectrum(eigenvalues=w, eigenvectors=vecs, classification=cls)


def retract_to_boundary(domain: DomainSpec, z, iters: int = 30, tol: float = 1e-13) -> np.ndarray:
    """Move points onto ``{rho = 0}`` by Newton steps along the gradient (vectorised)."""
    z = np.array(z, dtype=complex)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(iters):
            val, g = domain.rho.value_and_grad(z)
            gr = real_gradient(g)
            gn2 = np.sum(np.abs(gr) ** 2, axis=-1)
            gn2 = np.where(gn2 > 1e-24, gn2, np.nan)
            z = z - (val / gn2)[..., None] * gr
            if np.all(np.abs(val[np.isfinite(val)]) < tol):
                break
    return z


def sample_boundary(domain: DomainSpec, count: int, seed: int = 0, inside_bbox: bool = True) -> np.ndarray:
    """Boundary points obtained by retracting uniform bbox samples onto ``{rho = 0}``."""
    rng = np.random.default_rng(seed)
    out = []
    have = 0
    for _ in range(50):
        x = rng.uniform(domain.bbox_min, domain.bbox_max, size=(4 * count, domain.bbox_min.size))
        z = retract_to_boundary(domain, to_complex(x))
        ok = np.all(np.isfinite(z), axis=-1)
        ok[ok] &= np.abs(domain.rho.eval(z[ok])) < 1e-10
        if inside_bbox:
            ok[ok] &= in_bbox(domain, z[ok])
        out.append(z[ok])
        have += int(ok.sum())
        if have >= count:
            break
    pts = np.concatenate(out)[:count]
    if len(pts) < count:
        raise NoConvergence(f"only {len(pts)} boundary samples found for {domain.name}")
    return pts


def estimate_diameter(domain: DomainSpec, count: int = 2048, seed: int = 0, inflate: float = 1.05) -> float:
    pts = sample_boundary(domain, count, seed)
    return float(pdist(to_real(pts)).max() * inflate)


def collar_is_valid(domain: DomainSpec, eta: float, samples: int = 32, seed: int = 1) -> bool:
    """Check projection uniqueness along normal segments of half-width ``eta``."""
    trial = DomainSpec(domain.name, domain.rho, domain.bbox_min, domain.bbox_max, eta, domain.diameter)
    pts = sample_boundary(domain, samples, seed)
    for p in pts:
        try:
            nu = inner_normal(domain, p, check=False)
        except DegenerateGradient:
            return False
        for t in (-0.9, -0.5, 0.5, 0.9):
            try:
                q, _ = boundary_project(trial, p + t * eta * nu)
            except (OutsideCollar, NoConvergence):
                return False
            if np.linalg.norm(q - p) > 1e-6:
                return False
    return True


def validate_collar(domain: DomainSpec, max_halvings: int = 8) -> float:
    eta = domain.collar_eta0
    for _ in range(max_halvings + 1):
        if collar_is_valid(domain, eta):
            return eta
        eta *= 0.5
    raise NoConvergence(f"no valid collar width found for {domain.name}")


def make_domain(name: str, poly: Polynomial, bbox_min, bbox_max, collar_eta0: float | None = None,
                diameter: float | None = None, validate: bool = True, **chart) -> DomainSpec:
    if poly.hermitian_defect() > 1e-12:
        raise ValueError(f"defining function of {name} is not real-valued")
    bbox_min = np.asarray(bbox_min, dtype=float)
    bbox_max = np.asarray(bbox_max, dtype=float)
    if bbox_min.shape != (2 * poly.n,) or bbox_max.shape != (2 * poly.n,):
        raise ValueError(f"bbox must have {2 * poly.n} real coordinates")
    if collar_eta0 is None:
        collar_eta0 = 0.1 * float(np.min(bbox_max - bbox_min))
    dom = DomainSpec(name, CompiledPolynomial(poly), bbox_min, bbox_max, float(collar_eta0),
                     float(diameter) if diameter else np.nan, **chart)
    if not diameter:
        dom.diameter = estimate_diameter(dom)
    if validate:
        dom.collar_eta0 = validate_collar(dom)
    return dom


def slice_domain(domain: DomainSpec, p, v, radius: float, validate: bool = True) -> DomainSpec:
    """Two-dimensional slice through ``p`` spanned by the outward normal line and ``v``.

    Slice coordinates ``w`` map to ``p + w_1 e_N + w_2 v`` with ``e_N = -nu_p``,
    so the slice's inner normal at the origin is ``(-1, 0)``.
    """
    p = np.asarray(p, dtype=complex)
    v = np.asarray(v, dtype=complex)
    if domain.n < 2:
        raise PreconditionError("slicing needs n >= 2")
    g = domain.rho.grad_z(p)
    if abs(np.linalg.norm(v) - 1) > 1e-8 or abs(np.sum(g * v)) > 1e-8 * np.linalg.norm(g):
        raise PreconditionError("slice direction must be a unit complex tangent vector")
    nu = inner_normal(domain, p)
    frame = np.stack([-nu, v], axis=1)
    poly = domain.polynomial.compose_affine(p, frame)
    g0 = CompiledPolynomial(poly).grad_z(np.zeros(2))
    if np.linalg.norm(g0) < 1e-12:
        raise SliceNotNondegenerate("slice gradient vanishes at the origin")
    r = float(radius)
    return make_domain(
        f"{domain.name}/slice",
        poly,
        -r * np.ones(4),
        r * np.ones(4),
        collar_eta0=min(domain.collar_eta0, 0.5 * r),
        diameter=min(4 * r, domain.diameter),
        validate=validate,
        origin=p,
        frame=frame,
        parent=domain,
    )
