"""Complex-tangential boundary curves, horizontal connections and their offsets.

All curve constructions work in a two-dimensional slice (``n = 2``), where the
complex tangent space of the boundary is a complex line spanned by the unit
field ``v`` selected below. Flows of ``v`` and ``i v`` are horizontal.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares, minimize

from .errors import (
    EtaTooLarge,
    LeftNeighborhood,
    NodeOutsideAmbient,
    PreconditionError,
    SelectionDegenerate,
    ShootingFailed,
    StepRejection,
)
from .geometry import DomainSpec, contains, normal_field, retract_to_boundary
from .metric import SampledCurve

SELECTION_FLOOR = 1e-6


def tangential_field(domain: DomainSpec, zeta, check: bool = True) -> np.ndarray:
    """Unit complex-tangent vector with real positive second coordinate.

    Solves ``g_1 v_1 + g_2 v_2 = 0`` with ``g = d rho / dz``; vectorised over
    leading axes when ``check`` is false.
    """
    zeta = np.asarray(zeta, dtype=complex)
    if domain.n != 2:
        raise PreconditionError("the tangential field is defined on two-dimensional slices")
    if check:
        val = domain.rho.eval(zeta)
        if np.any(np.abs(val) > 1e-8):
            raise PreconditionError(f"rho = {np.max(np.abs(val)):.3e}; not a boundary point")
    g = domain.rho.grad_z(zeta)
    g1, g2 = g[..., 0], g[..., 1]
    nrm = np.linalg.norm(g, axis=-1)
    v2 = np.abs(g1) / nrm
    if np.any(v2 < SELECTION_FLOOR):
        raise SelectionDegenerate(f"selected field degenerates (|v2| = {np.min(v2):.2e})")
    v1 = -g2 * v2 / g1
    return np.stack([v1, v2 + 0j], axis=-1)


def _field(domain: DomainSpec, z, rotate: bool) -> np.ndarray:
    v = tangential_field(domain, z, check=False)
    return 1j * v if rotate else v


def normal_derivative(domain: DomainSpec, z, w) -> np.ndarray:
    """Directional derivative of the inner unit normal field at ``z`` along ``w``."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    _, g, A, L = domain.rho.all_derivatives(z)
    dg = np.einsum("...jk,...k->...j", A, w) + np.einsum("...jk,...k->...j", L, np.conj(w))
    n = np.linalg.norm(g, axis=-1, keepdims=True)
    dn = np.real(np.sum(dg * np.conj(g), axis=-1, keepdims=True)) / n
    return -np.conj(dg) / n + np.conj(g) * dn / n**2


def horizontality_residual(domain: DomainSpec, z, d) -> np.ndarray:
    """``|<d, nu>|``: size of the normal and J-normal components of ``d``."""
    nu = normal_field(domain, z)
    return np.abs(np.sum(np.asarray(d) * np.conj(nu), axis=-1))


@dataclass
class BoundaryCurve:
    """Sampled curve on the boundary of a two-dimensional slice."""

    domain: DomainSpec
    curve: SampledCurve
    length: float
    # flow segments (rotate, duration) for piecewise horizontal paths
    segments: tuple = ()

    @property
    def t(self) -> np.ndarray:
        return self.curve.t

    @property
    def nodes(self) -> np.ndarray:
        return self.curve.nodes

    @property
    def derivs(self) -> np.ndarray:
        return self.curve.derivs

    @property
    def rho_residual(self) -> np.ndarray:
        return np.abs(self.domain.rho.eval(self.nodes))

    @property
    def horizontality(self) -> np.ndarray:
        return horizontality_residual(self.domain, self.nodes, self.derivs)

    def subsample(self, every: int) -> "BoundaryCurve":
        sl = slice(None, None, every)
        c = SampledCurve(self.t[sl], self.nodes[sl], self.derivs[sl])
        return BoundaryCurve(self.domain, c, self.length, self.segments)


@dataclass
class OffsetCurve:
    eta: float
    base: BoundaryCurve
    curve: SampledCurve

    @property
    def nodes(self) -> np.ndarray:
        return self.curve.nodes


class _Stepper:
    """RK4 steps of a horizontal field followed by retraction onto the boundary."""

    def __init__(self, domain: DomainSpec, center, neighborhood: float = np.inf):
        self.domain = domain
        self.center = np.asarray(center, dtype=complex)
        self.neighborhood = neighborhood

    def step(self, z, sigma: float, rotate: bool) -> np.ndarray:
        F = lambda x: _field(self.domain, x, rotate)  # noqa: E731
        k1 = F(z)
        k2 = F(z + 0.5 * sigma * k1)
        k3 = F(z + 0.5 * sigma * k2)
        k4 = F(z + sigma * k3)
        raw = z + sigma / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        out = retract_to_boundary(self.domain, raw)
        if not np.all(np.isfinite(out)):
            raise StepRejection("boundary retraction diverged")
        if np.linalg.norm(out - raw) > 10 * sigma**2 + 1e-14:
            raise StepRejection(f"retraction moved the node by {np.linalg.norm(out - raw):.2e} at step {sigma:.2e}")
        if np.linalg.norm(out - self.center) > self.neighborhood:
            raise LeftNeighborhood(f"curve left the radius-{self.neighborhood} neighbourhood")
        return out

    def flow(self, z, tau: float, rotate: bool, steps: int) -> np.ndarray:
        sigma = tau / steps
        for _ in range(steps):
            z = self.step(z, sigma, rotate)
        return z


def integrate_tangential_curve(domain: DomainSpec, p, s: float, h: float,
                               neighborhood: float = np.inf) -> BoundaryCurve:
    """Integral curve of the tangential field from ``p`` on ``[0, s]`` with step at most ``h``."""
    p = np.asarray(p, dtype=complex)
    if s == 0:
        c = SampledCurve([0.0], p[None], tangential_field(domain, p)[None])
        return BoundaryCurve(domain, c, 0.0)
    steps = int(np.ceil(s / h - 1e-9))
    t = np.linspace(0.0, s, steps + 1)
    stepper = _Stepper(domain, p, neighborhood)
    nodes = [retract_to_boundary(domain, p)]
    for _ in range(steps):
        nodes.append(stepper.step(nodes[-1], s / steps, False))
    nodes = np.array(nodes)
    derivs = _field(domain, nodes, False)
    return BoundaryCurve(domain, SampledCurve(t, nodes, derivs), float(s), ((False, float(s)),))


def chord_arc_ratio(curve: BoundaryCurve) -> float:
    """Largest ``|t_1 - t_2| / |alpha(t_1) - alpha(t_2)|`` over node pairs."""
    t, x = curve.t, curve.nodes
    if len(t) < 2:
        return 1.0
    i, j = np.triu_indices(len(t), 1)
    chord = np.linalg.norm(x[i] - x[j], axis=-1)
    return float(np.max((t[j] - t[i]) / np.maximum(chord, 1e-300)))


def tangential_curve_with_chord_arc(domain: DomainSpec, p, s: float, h: float, eps_chord: float,
                                    max_halvings: int, neighborhood: float = np.inf,
                                    steps_multiple: int = 1) -> BoundaryCurve:
    """Integral curve whose length is halved until the chord-arc bound holds."""
    for _ in range(max_halvings + 1):
        steps = steps_multiple * int(np.ceil(s / (h * steps_multiple) - 1e-9))
        curve = integrate_tangential_curve(domain, p, s, s / steps, neighborhood)
        if chord_arc_ratio(curve) <= 1 + eps_chord:
            return curve
        s *= 0.5
    raise StepRejection(f"chord-arc bound 1+{eps_chord} not reached after {max_halvings} halvings")


def missing_component(domain: DomainSpec, p, q) -> float:
    """Size of ``q - p`` along the real span of ``nu_p`` and ``i nu_p``."""
    nu = normal_field(domain, np.asarray(p, dtype=complex))
    return float(abs(np.sum((np.asarray(q) - np.asarray(p)) * np.conj(nu))))


def ball_box_scale(domain: DomainSpec, p, q) -> float:
    """``|p - q| + sqrt(missing component)``, the sub-Riemannian size of the displacement."""
    return float(np.linalg.norm(np.asarray(q) - np.asarray(p))) + np.sqrt(missing_component(domain, p, q))


def _pattern(count: int) -> tuple:
    return tuple(bool(k % 2) for k in range(count))


def flow_path(domain: DomainSpec, p, segments, t_grid, max_step: float = 2e-3,
              neighborhood: float = np.inf) -> BoundaryCurve:
    """Nodes of a piecewise flow at parameters ``t_grid`` (unit speed, right-continuous derivative)."""
    p = np.asarray(p, dtype=complex)
    stepper = _Stepper(domain, p, neighborhood)
    bounds = np.concatenate([[0.0], np.cumsum([abs(tau) for _, tau in segments])])
    t_grid = np.asarray(t_grid, dtype=float)
    nodes, derivs = [], []
    z, t_cur, seg = retract_to_boundary(domain, p), 0.0, 0
    for t in t_grid:
        while True:
            while seg < len(segments) and bounds[seg + 1] <= t_cur + 1e-15:
                seg += 1
            if t <= t_cur + 1e-15 or seg >= len(segments):
                break
            rotate, tau = segments[seg]
            target = min(t, bounds[seg + 1])
            span = target - t_cur
            k = max(1, int(np.ceil(span / max_step)))
            z = stepper.flow(z, np.sign(tau) * span, rotate, k)
            t_cur = target
        nodes.append(z)
        if seg < len(segments):
            rotate, tau = segments[seg]
        else:
            rotate, tau = segments[-1] if segments else (False, 1.0)
        derivs.append(np.sign(tau) * _field(domain, z, rotate) if tau else _field(domain, z, rotate))
    c = SampledCurve(t_grid, np.array(nodes), np.array(derivs))
    return BoundaryCurve(domain, c, float(bounds[-1]), tuple(segments))


def _flow_batch(domain: DomainSpec, z, sigma, rotate: bool, steps: int, center, neighborhood: float):
    """Vectorised RK4 flow of many starting points with per-row step ``sigma``; returns (z, bad)."""
    bad = np.zeros(len(z), dtype=bool)
    s = sigma[:, None]
    with np.errstate(all="ignore"):
        for _ in range(steps):
            try:
                F = lambda x: _field(domain, x, rotate)  # noqa: E731
                k1 = F(z)
                k2 = F(z + 0.5 * s * k1)
                k3 = F(z + 0.5 * s * k2)
                k4 = F(z + s * k3)
            except SelectionDegenerate:
                return z, np.ones(len(z), dtype=bool)
            raw = z + s / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            out = retract_to_boundary(domain, raw)
            fin = np.all(np.isfinite(out), axis=-1)
            moved = np.where(fin, np.linalg.norm(np.where(fin[:, None], out, 0) - raw, axis=-1), np.inf)
            bad |= ~fin | (moved > 10 * sigma**2 + 1e-14)
            z = np.where(bad[:, None], z, out)
            bad |= np.linalg.norm(z - center, axis=-1) > neighborhood
    return z, bad


@dataclass
class Connection:
    curve: BoundaryCurve
    residual: float
    evaluations: int
    segments: tuple

    @property
    def length(self) -> float:
        return self.curve.length


class _Shooter:
    """Endpoint misfit of alternating flows, in the real tangent frame at the target."""

    def __init__(self, domain, p, q, steps, neighborhood):
        self.domain, self.p, self.q = domain, p, q
        self.steps, self.neighborhood = steps, neighborhood
        vq = tangential_field(domain, q)
        self.basis = np.stack([vq, 1j * vq, 1j * normal_field(domain, q)])
        self.evaluations = 0

    def misfit(self, T, pattern) -> np.ndarray:
        T = np.atleast_2d(T)
        self.evaluations += 1
        z = np.tile(self.p, (len(T), 1))
        bad = np.zeros(len(T), dtype=bool)
        for k, rotate in enumerate(pattern):
            z, b = _flow_batch(self.domain, z, T[:, k] / self.steps, rotate, self.steps, self.p, self.neighborhood)
            bad |= b
        out = np.real((z - self.q) @ self.basis.conj().T)
        out[bad] = 1e3
        return out

    def fun(self, x, pattern):
        return self.misfit(x, pattern)[0]

    def jac(self, x, pattern):
        h = 1e-7 * np.maximum(1.0, np.abs(x))
        X = np.vstack([x, x + np.diag(h)])
        F = self.misfit(X, pattern)
        return ((F[1:] - F[0]) / h[:, None]).T


def _starts(pattern, a, b, scale, rng, extra):
    n_v = sum(1 for r in pattern if not r)
    n_iv = len(pattern) - n_v
    base = np.array([b / n_iv if r else a / n_v for r in pattern])
    starts = [base]
    if len(pattern) == 3:
        for sgn in (1.0, -1.0):
            for beta in (0.0, 1.0, -1.0):
                x = base.copy()
                x[0] += sgn * scale
                x[2] -= sgn * scale
                x[1] += beta * scale
                starts.append(x)
    else:
        # small closed loops v, iv, -v, -iv produce displacement in the missing direction
        for sgn in (1.0, -1.0):
            for amp in (1.0, 2.0):
                x = base.copy()
                x[0] += sgn * amp * scale
                x[1] += amp * scale
                x[2] -= sgn * amp * scale
                x[3] -= amp * scale
                starts.append(x)
    starts += [base + scale * rng.standard_normal(len(pattern)) for _ in range(extra)]
    return starts


def horizontal_connect(domain: DomainSpec, p, q, budget: int = 600, tol: float = 1e-5,
                       nodes: int = 73, steps_per_segment: int = 8, neighborhood: float = np.inf,
                       seed: int = 42, polish: int = 2) -> Connection:
    """Piecewise horizontal path from ``p`` to ``q`` by shooting on flow durations.

    Alternating flows of ``v`` and ``i v`` with 3 and 5 segments (7 if both
    fail). Least squares on the endpoint misfit from several starts collects
    candidate durations; the ``polish`` shortest candidates are then shortened
    under the endpoint constraint and the shortest result is kept. ``budget``
    counts batched endpoint evaluations.
    """
    p = retract_to_boundary(domain, np.asarray(p, dtype=complex))
    q = retract_to_boundary(domain, np.asarray(q, dtype=complex))
    if np.linalg.norm(p - q) == 0:
        c = flow_path(domain, p, ((False, 0.0),), [0.0])
        return Connection(c, 0.0, 0, ())
    sh = _Shooter(domain, p, q, steps_per_segment, neighborhood)
    vp = tangential_field(domain, p)
    d0 = q - p
    a = float(np.real(np.vdot(vp, d0)))
    b = float(np.real(np.vdot(1j * vp, d0)))
    m = float(np.real(np.vdot(1j * normal_field(domain, p), d0)))
    scale = np.sqrt(abs(m)) + 1e-12
    rng = np.random.default_rng(seed)
    # a quarter of the budget is kept for shortening; the 3- and 5-segment searches split the rest
    reserve = budget // 4
    share = (budget - reserve) // 2
    found = []
    for counts in ((3, 5), (7,)):
        for count in counts:
            pattern = _pattern(count)
            stop = sh.evaluations + share if count != 7 else budget - reserve // 2
            for x0 in _starts(pattern, a, b, scale, rng, extra=2):
                left = stop - sh.evaluations
                if left < 8:
                    break
                # every trf iteration costs one residual and one batched Jacobian evaluation
                sol = least_squares(sh.fun, x0, jac=sh.jac, args=(pattern,), method="trf",
                                    xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=min(30, left // 2))
                if np.linalg.norm(sol.fun) > 0.1 * tol:
                    continue
                if any(pat == pattern and np.allclose(x, sol.x, atol=1e-6) for _, x, pat in found):
                    continue
                found.append((float(np.sum(np.abs(sol.x))), sol.x, pattern))
        if found:
            break
    if not found:
        raise ShootingFailed(f"no horizontal connection within {budget} endpoint evaluations")
    found.sort(key=lambda c: c[0])
    best = found[0]
    chosen = found[:polish]
    for k, (_, x, pattern) in enumerate(chosen):
        limit = min(150, (budget - sh.evaluations) // (len(chosen) - k))
        taus = _shorten(sh, x, pattern, tol, limit)
        length = float(np.sum(np.abs(taus)))
        if length < best[0] - 1e-12:
            best = (length, taus, pattern)
    length, taus, pattern = best
    segs = tuple((r, float(t)) for r, t in zip(pattern, taus) if abs(t) > 0)
    curve = flow_path(domain, p, segs, np.linspace(0.0, length, nodes),
                      max_step=min(2e-3, length / (8 * steps_per_segment)), neighborhood=neighborhood)
    residual = float(np.linalg.norm(curve.nodes[-1] - q))
    if residual > tol:
        raise ShootingFailed(f"endpoint residual {residual:.2e} exceeds {tol:.1e}")
    return Connection(curve, residual, sh.evaluations, segs)


class _Exhausted(Exception):
    pass


def _shorten(sh: _Shooter, taus, pattern, tol, limit: int = 120):
    """Minimise total duration subject to the endpoint constraint within ``limit`` evaluations.

    Returns the shortest constraint-satisfying iterate seen, or the input.
    """
    eps = 1e-12
    stop = sh.evaluations + limit
    best = [float(np.sum(np.abs(taus))), np.asarray(taus, dtype=float)]

    def length(x):
        return float(np.sum(np.sqrt(x**2 + eps)))

    def dlength(x):
        return x / np.sqrt(x**2 + eps)

    def con(x):
        if sh.evaluations >= stop:
            raise _Exhausted
        r = sh.fun(x, pattern)
        if np.linalg.norm(r) <= 0.1 * tol and np.sum(np.abs(x)) < best[0]:
            best[:] = [float(np.sum(np.abs(x))), x.copy()]
        return r

    def dcon(x):
        if sh.evaluations >= stop:
            raise _Exhausted
        return sh.jac(x, pattern)

    if limit < 2:
        return best[1]
    try:
        minimize(length, taus, jac=dlength, method="SLSQP", constraints=[{"type": "eq", "fun": con, "jac": dcon}],
                 options={"maxiter": 60, "ftol": 1e-14})
    except _Exhausted:
        pass
    return best[1]


def offset_curve(base: BoundaryCurve, eta: float) -> OffsetCurve:
    """``alpha + eta nu(alpha)`` with the exact derivative ``alpha' + eta d nu(alpha')``."""
    dom = base.domain
    if not eta > 0:
        raise PreconditionError("offset must be positive")
    if eta >= dom.collar_eta0:
        raise EtaTooLarge(f"eta = {eta} is not below the collar width {dom.collar_eta0}")
    nu = normal_field(dom, base.nodes)
    nodes = base.nodes + eta * nu
    derivs = base.derivs + eta * normal_derivative(dom, base.nodes, base.derivs)
    return OffsetCurve(float(eta), base, SampledCurve(base.t, nodes, derivs))


def embed_curve(curve, domain: DomainSpec, check: bool = True) -> SampledCurve:
    """Push a slice curve through the affine chart ``w -> origin + frame @ w`` of ``domain``."""
    c = curve.curve if hasattr(curve, "curve") else curve
    if domain.frame is None:
        return c
    nodes = domain.origin + c.nodes @ domain.frame.T
    derivs = c.derivs @ domain.frame.T
    if check and domain.parent is not None:
        inside = contains(domain.parent, nodes)
        if not np.all(inside):
            raise NodeOutsideAmbient(f"{int(np.sum(~inside))} embedded nodes lie outside {domain.parent.name}")
    return SampledCurve(c.t, nodes, derivs)


def sample_nearby_boundary(domain: DomainSpec, p, count: int, radius: float, seed: int = 42,
                           min_fraction: float = 0.2) -> np.ndarray:
    """Boundary points near ``p`` from random real-tangent displacements, retracted."""
    p = np.asarray(p, dtype=complex)
    v = tangential_field(domain, p)
    nu = normal_field(domain, p)
    basis = np.stack([v, 1j * v, 1j * nu])
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((count, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    r = radius * rng.uniform(min_fraction, 1.0, size=count)
    return retract_to_boundary(domain, p + (r[:, None] * dirs) @ basis)
