"""Bounds for the Kobayashi–Royden metric and Kobayashi lengths of curves.

Upper bounds come from explicit admissible holomorphic discs
``phi(lam) = z + lam * r * u + lam**2 * q``; any admissible disc with
``phi(0) = z`` and ``phi'(0) = r u`` certifies ``kappa(z; v) <= |v| / r``.
Lower bounds use the inclusion of the domain in a ball of radius equal to its
diameter.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import simpson

from .config import DiscSearchConfig, DNTConfig
from .errors import CenterOutside, ClassificationMismatch, NodeOutsideDomain, OutsideModelDomain
from .geometry import DomainSpec, boundary_project, contains, inner_normal, split_hn, tangent_levi_spectrum
from .polynomial import to_complex

_GRIDS: dict = {}


def polar_grid(radii: int, angles: int) -> tuple[np.ndarray, np.ndarray]:
    """Polar coordinates of grid points on the closed unit disc, outer ring first."""
    r = np.linspace(1 - 1e-9, 1.0 / radii, radii)
    th = 2 * np.pi * np.arange(angles) / angles
    rr, tt = np.meshgrid(r, th, indexing="ij")
    return rr.ravel(), tt.ravel()


def disc_grid(radii: int, angles: int, degree: int = 2) -> np.ndarray:
    """Powers ``lam**k`` (k = 1..degree) of the polar grid points."""
    key = (radii, angles, degree)
    if key not in _GRIDS:
        rr, tt = polar_grid(radii, angles)
        lam = rr * np.exp(1j * tt)
        _GRIDS[key] = lam[:, None] ** np.arange(1, degree + 1)[None, :]
    return _GRIDS[key]


@dataclass
class AnalyticDiscCandidate:
    center: np.ndarray
    linear_coeff: np.ndarray
    quad_coeff: np.ndarray

    def __call__(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=complex)[..., None]
        return self.center + lam * self.linear_coeff + lam**2 * self.quad_coeff

    def is_admissible(self, domain: DomainSpec, radii: int = 24, angles: int = 64) -> bool:
        lam = disc_grid(radii, angles, 1)[:, 0]
        return bool(np.all(contains(domain, self(lam))))


def canonical_direction(v) -> tuple[np.ndarray, float]:
    """Unit vector ``u`` with ``v = |v| e^{i t} u`` and a fixed phase convention.

    The largest component of ``u`` is made real positive, so ``v`` and ``c v``
    share ``u`` for every complex ``c``.
    """
    v = np.asarray(v, dtype=complex)
    norm = float(np.linalg.norm(v))
    if norm == 0:
        return v, 0.0
    u = v / norm
    k = int(np.argmax(np.round(np.abs(u), 12)))
    u = u * (np.conj(u[k]) / abs(u[k]))
    return u, norm


class _RadiusProblem:
    """Feasibility of ``z + lam r u + sum_k lam^k c_k`` on a fixed disc grid.

    ``coeffs`` has shape ``(degree - 1, n)`` and holds ``c_2 .. c_degree``.
    """

    def __init__(self, domain: DomainSpec, center, u, cfg: DiscSearchConfig):
        self.domain = domain
        self.center = np.asarray(center, dtype=complex)
        self.u = np.asarray(u, dtype=complex)
        self.cfg = cfg
        self.powers = disc_grid(cfg.radii, cfg.angles, cfg.degree)
        self.fine_powers = disc_grid(cfg.verify_radii, cfg.verify_angles, cfg.degree)
        self.polar = polar_grid(cfg.radii, cfg.angles)
        self.spacing = (1.0 / cfg.radii, 2 * np.pi / cfg.angles)
        self.rmax = float(np.linalg.norm(domain.bbox_max - domain.bbox_min))
        offs = np.linspace(-1.0, 1.0, 9)
        self._patch = np.stack(np.meshgrid(offs, offs, indexing="ij"), -1).reshape(-1, 2)

    def _points(self, r, coeffs, pw):
        return self.center + (r * pw[:, :1]) * self.u + pw[:, 1:] @ coeffs

    def _violation(self, r, coeffs, pw) -> np.ndarray:
        pts = self._points(r, coeffs, pw)
        vals = self.domain.rho.eval(pts)
        return np.where(contains(self.domain, pts), vals, np.inf)

    def feasible(self, r: float, coeffs: np.ndarray, fine: bool = False, refine: int = 2, seeds: int = 3) -> bool:
        """Grid check followed by two levels of local refinement around the worst grid points."""
        if fine:
            return bool(np.all(np.isfinite(self._violation(r, coeffs, self.fine_powers))))
        vals = self._violation(r, coeffs, self.powers)
        if not np.all(np.isfinite(vals)):
            return False
        idx = np.argsort(vals)[-seeds:]
        rad, ang = self.polar[0][idx], self.polar[1][idx]
        dr, dt = self.spacing
        deg = np.arange(1, self.cfg.degree + 1)
        for _ in range(refine):
            pr = np.clip(rad[:, None] + dr * self._patch[None, :, 0], 0.0, 1.0).ravel()
            pt = (ang[:, None] + dt * self._patch[None, :, 1]).ravel()
            lam = pr * np.exp(1j * pt)
            v = self._violation(r, coeffs, lam[:, None] ** deg[None, :])
            if not np.all(np.isfinite(v)):
                return False
            best = np.argmax(v.reshape(len(rad), -1), axis=1)
            rad = pr.reshape(len(rad), -1)[np.arange(len(rad)), best]
            ang = pt.reshape(len(ang), -1)[np.arange(len(ang)), best]
            dr, dt = dr / 4, dt / 4
        return True

    def largest(self, q: np.ndarray, lo: float = 0.0) -> float:
        """Largest feasible ``r >= lo`` to relative tolerance; ``lo`` must be feasible."""
        if lo == 0.0:
            if not self.feasible(0.0, q):
                return 0.0
            hi = self.rmax * 1e-3
        else:
            hi = lo * 1.5
        while self.feasible(hi, q):
            lo, hi = hi, 2 * hi
            if hi > self.rmax:
                return lo
        for _ in range(200):
            if lo > 0 and hi - lo <= self.cfg.rel_tol * lo:
                break
            mid = 0.5 * (lo + hi)
            if self.feasible(mid, q):
                lo = mid
            else:
                hi = mid
        return lo

    def certify(self, r: float, q: np.ndarray) -> float:
        r *= 1 - self.cfg.shrink
        for _ in range(200):
            if r <= 0 or (self.feasible(r, q) and self.feasible(r, q, fine=True)):
                return r
            r *= 1 - self.cfg.shrink
        return 0.0


def admissible_radius(domain: DomainSpec, center, u, quad=None, config: DiscSearchConfig = DiscSearchConfig()) -> float:
    """Certified radius of the disc ``center + lam r u + lam^2 quad`` (shrink factor applied)."""
    center = np.asarray(center, dtype=complex)
    if not contains(domain, center):
        raise CenterOutside(f"{center} is not in {domain.name}")
    coeffs = np.zeros((config.degree - 1, domain.n), complex)
    if quad is not None:
        coeffs[0] = quad
    prob = _RadiusProblem(domain, center, u, config)
    return prob.certify(prob.largest(coeffs), coeffs)


@dataclass
class DiscSearchResult:
    kappa: float
    radius: float
    coeffs: np.ndarray  # c_2 .. c_degree
    evaluations: int

    @property
    def quad(self) -> np.ndarray:
        return self.coeffs[0]


def search_disc(domain: DomainSpec, z, v, config: DiscSearchConfig = DiscSearchConfig()) -> DiscSearchResult:
    """Compass search over the higher disc coefficients maximising the admissible radius.

    Starts from the affine disc; steps double after a successful poll and
    halve otherwise. Each poll costs one grid check unless it improves.
    """
    z = np.asarray(z, dtype=complex)
    if not contains(domain, z):
        raise CenterOutside(f"{z} is not in {domain.name}")
    u, norm = canonical_direction(v)
    n, m = domain.n, config.degree - 1
    if norm == 0:
        return DiscSearchResult(0.0, np.inf, np.zeros((m, n), complex), 0)

    def unpack(x):
        return to_complex(x.reshape(m, 2 * n))

    prob = _RadiusProblem(domain, z, u, config)
    x = np.zeros(2 * n * m)
    r_best = prob.largest(unpack(x))
    evals = 1
    budget = config.evaluation_budget(x.size)
    step = config.initial_step
    dirs = np.concatenate([np.eye(x.size), -np.eye(x.size)])
    while m and evals < budget and step >= config.min_step:
        improved = False
        for d in dirs:
            if evals >= budget:
                break
            trial = x + step * d
            cc = unpack(trial)
            evals += 1
            r_probe = r_best * (1 + 2 * config.rel_tol)
            if prob.feasible(r_probe, cc):
                r_new = prob.largest(cc, lo=r_probe)
                if r_new > r_best:
                    x, r_best, improved = trial, r_new, True
                    break
        step = 2 * step if improved else 0.5 * step
    cc = unpack(x)
    r = prob.certify(r_best, cc)
    kappa = norm / r if r > 0 else np.inf
    return DiscSearchResult(kappa, r, cc, evals)


def kappa_upper(domain: DomainSpec, z, v, config: DiscSearchConfig = DiscSearchConfig()) -> float:
    return search_disc(domain, z, v, config).kappa


def kappa_lower(domain: DomainSpec, z, v) -> float:
    return float(np.linalg.norm(v)) / domain.diameter


def c_omega(domain: DomainSpec) -> float:
    return 1.0 / domain.diameter


# closed forms on model domains; vectorised over leading axes


def kappa_exact_disc(z, v):
    z = np.asarray(z, dtype=complex)
    v = np.asarray(v, dtype=complex)
    r2 = np.abs(z) ** 2
    if np.any(r2 >= 1):
        raise OutsideModelDomain("point outside the unit disc")
    out = np.abs(v) / (1 - r2)
    return np.sum(out, axis=-1) if out.ndim and out.shape[-1] == 1 else out


def kappa_exact_ball(z, v):
    z = np.asarray(z, dtype=complex)
    v = np.asarray(v, dtype=complex)
    s = 1 - np.sum(np.abs(z) ** 2, axis=-1)
    if np.any(s <= 0):
        raise OutsideModelDomain("point outside the unit ball")
    zv = np.abs(np.sum(v * np.conj(z), axis=-1))
    return np.sqrt(np.sum(np.abs(v) ** 2, axis=-1) / s + zv**2 / s**2)


def kappa_exact_polydisc(z, v):
    z = np.asarray(z, dtype=complex)
    v = np.asarray(v, dtype=complex)
    r2 = np.abs(z) ** 2
    if np.any(r2 >= 1):
        raise OutsideModelDomain("point outside the unit polydisc")
    return np.max(np.abs(v) / (1 - r2), axis=-1)


EXACT = {"exact_disc": kappa_exact_disc, "exact_ball": kappa_exact_ball, "exact_polydisc": kappa_exact_polydisc}


@dataclass
class MetricProvider:
    kind: str
    domain: DomainSpec
    eval_fn: Callable
    is_exact: bool
    config: Optional[DiscSearchConfig] = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def c_omega(self) -> float:
        return c_omega(self.domain)

    def eval(self, z, v) -> float:
        z = np.asarray(z, dtype=complex)
        v = np.asarray(v, dtype=complex)
        if self.is_exact:
            return float(self.eval_fn(z, v))
        key = (z.tobytes(), v.tobytes())
        if key not in self._cache:
            self._cache[key] = float(self.eval_fn(z, v))
        return self._cache[key]

    def eval_many(self, zs, vs) -> np.ndarray:
        zs = np.asarray(zs, dtype=complex)
        vs = np.asarray(vs, dtype=complex)
        if self.is_exact:
            return np.asarray(self.eval_fn(zs, vs), dtype=float)
        return np.array([self.eval(z, v) for z, v in zip(zs, vs)])

    def lower(self, z, v) -> float:
        return kappa_lower(self.domain, z, v)


def exact_provider(kind: str, domain: DomainSpec) -> MetricProvider:
    return MetricProvider(kind, domain, EXACT[kind], True)


def disc_search_provider(domain: DomainSpec, config: DiscSearchConfig = DiscSearchConfig()) -> MetricProvider:
    return MetricProvider("disc_search", domain, lambda z, v: kappa_upper(domain, z, v, config), False, config)


@dataclass
class SampledCurve:
    t: np.ndarray
    nodes: np.ndarray
    derivs: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.nodes = np.asarray(self.nodes, dtype=complex)
        self.derivs = np.asarray(self.derivs, dtype=complex)

    @classmethod
    def from_function(cls, f, df, t) -> "SampledCurve":
        t = np.asarray(t, dtype=float)
        return cls(t, np.array([f(s) for s in t]), np.array([df(s) for s in t]))

    @classmethod
    def segment(cls, a, b, nodes: int = 33) -> "SampledCurve":
        a = np.asarray(a, dtype=complex)
        b = np.asarray(b, dtype=complex)
        t = np.linspace(0.0, 1.0, nodes)
        return cls(t, a + t[:, None] * (b - a), np.tile(b - a, (nodes, 1)))

    def euclidean_length(self) -> float:
        return float(simpson(np.linalg.norm(self.derivs, axis=-1), x=self.t)) if len(self.t) > 1 else 0.0

    def derivative_mismatch(self) -> float:
        """Largest relative gap between stored and finite-difference derivatives at interior nodes."""
        if len(self.t) < 3:
            return 0.0
        fd = np.gradient(self.nodes, self.t, axis=0)[1:-1]
        ref = self.derivs[1:-1]
        scale = np.maximum(np.linalg.norm(ref, axis=-1), 1e-300)
        return float(np.max(np.linalg.norm(fd - ref, axis=-1) / scale))

    def sub(self, i: int, j: int) -> "SampledCurve":
        return SampledCurve(self.t[i:j + 1], self.nodes[i:j + 1], self.derivs[i:j + 1])


def integrate_samples(values: np.ndarray, t: np.ndarray) -> float:
    if len(t) < 2:
        return 0.0
    return float(simpson(values, x=t))


def curve_kappa_length(provider: MetricProvider, curve: SampledCurve, with_error: bool = False):
    """Simpson quadrature of ``kappa(gamma, gamma')``; optionally with a Richardson error estimate."""
    inside = contains(provider.domain, curve.nodes)
    if not np.all(inside):
        raise NodeOutsideDomain(f"{int(np.sum(~np.asarray(inside)))} curve nodes lie outside {provider.domain.name}")
    vals = provider.eval_many(curve.nodes, curve.derivs)
    fine = integrate_samples(vals, curve.t)
    if not with_error:
        return fine
    if len(curve.t) >= 5 and len(curve.t) % 2 == 1:
        coarse = integrate_samples(vals[::2], curve.t[::2])
        err = abs(fine - coarse) / 15.0
    else:
        err = np.nan
    return fine, err


def kobayashi_distance_lower(domain: DomainSpec, z, w) -> float:
    return c_omega(domain) * float(np.linalg.norm(np.asarray(z, complex) - np.asarray(w, complex)))


def dnt_bound(domain: DomainSpec, z, v, c_l: float, exponent: float = 0.75) -> float:
    """``c_l (|v_N| / delta^exponent + |v|)`` at a collar point ``z``."""
    z = np.asarray(z, dtype=complex)
    _, delta = boundary_project(domain, z)
    sp = split_hn(domain, z, v)
    return c_l * (np.linalg.norm(sp.v_n) / delta**exponent + np.linalg.norm(v))


@dataclass
class DNTFit:
    c_l: float
    expected: bool
    rows: list  # dicts: delta, direction, kappa_upper, bound_unit, ratio, slack

    def as_table(self) -> list[dict]:
        return self.rows


def fit_dnt_constant(domain: DomainSpec, p, config: DNTConfig = DNTConfig(),
                     disc: DiscSearchConfig = DiscSearchConfig(), directions=("tangential", "normal", "mixed"),
                     allow_mismatch: bool = False) -> DNTFit:
    """Empirical smallest constant with ``kappa_upper <= dnt_bound`` on collar samples near ``p``.

    The fitted value is a measurement on finitely many samples, not the
    non-constructive constant of the upper estimate itself.
    """
    p = np.asarray(p, dtype=complex)
    spec = tangent_levi_spectrum(domain, p)
    expected = spec.classification == "non-pseudoconvex"
    if not expected and not allow_mismatch:
        raise ClassificationMismatch(f"{p} is classified {spec.classification}; the bound is not expected there")
    nu = inner_normal(domain, p)
    tan = spec.eigenvectors[:, 0]
    dirs = {"tangential": tan, "normal": nu, "mixed": (tan + nu) / np.sqrt(2)}
    rows = []
    for delta in config.deltas:
        z = p + delta * nu
        if delta >= domain.collar_eta0 or not contains(domain, z):
            continue
        for name in directions:
            v = dirs[name]
            k = kappa_upper(domain, z, v, disc)
            unit = dnt_bound(domain, z, v, 1.0, config.exponent)
            rows.append({"delta": delta, "direction": name, "kappa_upper": k, "bound_unit": unit, "ratio": k / unit})
    c_l = max(r["ratio"] for r in rows)
    for r in rows:
        r["slack"] = c_l * r["bound_unit"] - r["kappa_upper"]
    return DNTFit(c_l, expected, rows)
