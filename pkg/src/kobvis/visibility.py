"""Certified geodesic defects of offset curves and the visibility-violation pipeline.

The pipeline picks a boundary point where the tangential Levi form has a
negative eigenvalue, slices the domain to two complex dimensions along that
direction, builds a horizontal boundary curve in the slice, pushes it into the
domain by ``eta`` along the inner normal, and measures how close the offsets
are to Kobayashi geodesics while they approach the boundary.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Optional

import numpy as np

from .config import DNTConfig, ExperimentConfig
from .curves import (
    BoundaryCurve,
    OffsetCurve,
    ball_box_scale,
    embed_curve,
    horizontal_connect,
    offset_curve,
    sample_nearby_boundary,
    tangential_curve_with_chord_arc,
)
from .errors import FitMissing, KobvisError, NoNonPseudoconvexPoint, PreconditionError
from .geometry import (
    DomainSpec,
    boundary_project,
    normal_field,
    retract_to_boundary,
    sample_boundary,
    slice_domain,
    tangent_levi_spectrum,
)
from .metric import (
    MetricProvider,
    SampledCurve,
    c_omega as domain_c_omega,
    curve_kappa_length,
    disc_search_provider,
    fit_dnt_constant,
    integrate_samples,
)

# derivative components below this fraction of |alpha'| are treated as round-off
NOISE_FLOOR = 1e-10
COLLAR_SLACK = 0.05


def spread(values, floor: float = 0.0) -> float:
    """``max / min`` of positive values; ``1`` when every value is at or below ``floor``."""
    v = np.asarray(values, dtype=float)
    if np.all(v <= floor):
        return 1.0
    if np.min(v) <= floor:
        return np.inf
    return float(np.max(v) / np.min(v))


# ---------------------------------------------------------------- derivative-gap checks


def lemma22_check(base: BoundaryCurve, offset: OffsetCurve) -> dict:
    """Horizontal and normal derivative gaps between an offset and its base curve.

    Both derivatives are split with the normal at the base node. Ratios are
    ``|gamma'_H - alpha'_H| / (eta |alpha'|)`` and
    ``(|gamma'_N| - |alpha'_N|)_+ / (eta |alpha'|)``; nodes with zero speed are skipped.
    """
    if offset.base is not base and not np.array_equal(offset.base.nodes, base.nodes):
        raise PreconditionError("offset curve was not built from this base")
    nu = normal_field(base.domain, base.nodes)
    a, g = base.derivs, offset.curve.derivs
    aN = np.sum(a * np.conj(nu), axis=-1)
    gN = np.sum(g * np.conj(nu), axis=-1)
    aH = a - aN[:, None] * nu
    gH = g - gN[:, None] * nu
    speed = np.linalg.norm(a, axis=-1)
    ok = speed > 0
    if not np.any(ok):
        return {"max_h_ratio": 0.0, "max_n_ratio": 0.0, "max_base_normal": 0.0}
    eta = offset.eta
    h = np.linalg.norm(gH - aH, axis=-1)[ok] / (eta * speed[ok])
    gap = np.abs(gN[ok]) - np.abs(aN[ok])
    gap = np.where(gap > NOISE_FLOOR * speed[ok], gap, 0.0)
    n = gap / (eta * speed[ok])
    return {
        "max_h_ratio": float(np.max(h)),
        "max_n_ratio": float(np.max(n)),
        "max_base_normal": float(np.max(np.abs(aN[ok]) / speed[ok])),
    }


# ---------------------------------------------------------------- geodesic defect


@dataclass
class GeodesicDefectReport:
    lambda_hat: float
    eps_hat: float
    c1: float
    c_omega: float
    rows: list  # dicts: t1, t2, euclid, l_e, l_kappa_upper, k_lower, ratio
    kappa: np.ndarray = field(repr=False)
    deltas: np.ndarray = field(repr=False)
    max_boundary_distance: float = np.nan
    min_boundary_distance: float = np.nan
    flags: dict = field(default_factory=dict)

    def replay(self, rtol: float = 1e-12) -> bool:
        """Check the per-arc certification inequalities from the stored table alone."""
        for r in self.rows:
            if r["l_kappa_upper"] > self.lambda_hat * r["k_lower"] * (1 + rtol):
                return False
            if r["l_kappa_upper"] > r["k_lower"] + self.eps_hat + rtol * r["l_kappa_upper"]:
                return False
        return True


def arc_indices(count: int, arc_points: int) -> np.ndarray:
    if arc_points < 2 or (count - 1) % (arc_points - 1):
        raise ValueError(f"{count} nodes cannot be split into {arc_points - 1} equal intervals")
    per = (count - 1) // (arc_points - 1)
    if per % 2:
        raise ValueError("Simpson quadrature needs an even number of node intervals per arc-grid interval")
    return np.arange(0, count, per)


def geodesic_defect(curve: SampledCurve, domain: DomainSpec, provider: MetricProvider,
                    c_omega: Optional[float] = None, arc_points: int = 10,
                    distances: bool = True) -> GeodesicDefectReport:
    """Certified ``(lambda, 0)`` and ``(1, eps)`` defects of a curve over a grid of sub-arcs.

    ``kappa`` is evaluated once per node; each arc length is a Simpson sum on
    the node subrange. ``k_lower = c_omega * chord``.
    """
    c_omega = domain_c_omega(domain) if c_omega is None else c_omega
    c = curve.curve if hasattr(curve, "curve") else curve
    idx = arc_indices(len(c.t), arc_points)
    kappa = provider.eval_many(c.nodes, c.derivs)
    speed = np.linalg.norm(c.derivs, axis=-1)
    rows = []
    for i, j in combinations(idx, 2):
        sl = slice(i, j + 1)
        l_k = integrate_samples(kappa[sl], c.t[sl])
        l_e = integrate_samples(speed[sl], c.t[sl])
        chord = float(np.linalg.norm(c.nodes[j] - c.nodes[i]))
        k_low = c_omega * chord
        rows.append({
            "t1": float(c.t[i]), "t2": float(c.t[j]), "euclid": chord, "l_e": l_e,
            "l_kappa_upper": l_k, "k_lower": k_low, "ratio": l_k / k_low if k_low > 0 else np.inf,
        })
    lam = max(r["ratio"] for r in rows)
    eps = max(max(r["l_kappa_upper"] - r["k_lower"], 0.0) for r in rows)
    ok = speed > 0
    c1 = float(np.max(kappa[ok] / speed[ok])) if np.any(ok) else 0.0
    deltas = np.full(len(c.t), np.nan)
    if distances:
        for k, z in enumerate(c.nodes):
            try:
                deltas[k] = boundary_project(domain, z)[1]
            except KobvisError:
                pass
    rep = GeodesicDefectReport(
        lambda_hat=float(lam), eps_hat=float(eps), c1=c1, c_omega=float(c_omega), rows=rows,
        kappa=kappa, deltas=deltas,
        max_boundary_distance=float(np.nanmax(deltas)) if np.any(np.isfinite(deltas)) else np.nan,
        min_boundary_distance=float(np.nanmin(deltas)) if np.any(np.isfinite(deltas)) else np.nan,
    )
    rep.flags = {"arcs": len(rows), "replay": rep.replay(), "lambda_finite": bool(np.isfinite(lam))}
    return rep


# ---------------------------------------------------------------- comparability


COMPARED = ("chord", "l_e", "l_kappa_upper", "k_upper", "k_lower")


@dataclass
class ComparabilityTable:
    rows: list
    r_measured: float
    r_allowed: float
    chord_below_length: bool
    bounds_ordered: bool

    @property
    def passes(self) -> bool:
        return self.r_measured <= self.r_allowed and self.chord_below_length and self.bounds_ordered


def comparability_check(curve, domain: DomainSpec, provider: MetricProvider, c_omega: Optional[float] = None,
                        arc_points: int = 10, r_allowed: float = 25.0,
                        report: Optional[GeodesicDefectReport] = None) -> ComparabilityTable:
    """Pairwise ratios of chord, Euclidean length, Kobayashi length and distance bounds per arc.

    The arc itself is an admissible path, so its Kobayashi length serves as
    ``k_upper``.
    """
    report = report or geodesic_defect(curve, domain, provider, c_omega, arc_points, distances=False)
    rows, worst = [], 1.0
    chord_ok = bounds_ok = True
    for r in report.rows:
        q = {"chord": r["euclid"], "l_e": r["l_e"], "l_kappa_upper": r["l_kappa_upper"],
             "k_upper": r["l_kappa_upper"], "k_lower": r["k_lower"]}
        row = {"t1": r["t1"], "t2": r["t2"], **q}
        for a, b in combinations(COMPARED, 2):
            ratio = q[a] / q[b]
            row[f"{a}/{b}"] = ratio
            worst = max(worst, ratio, 1 / ratio)
        chord_ok &= q["chord"] <= q["l_e"] * (1 + 1e-9)
        bounds_ok &= q["k_lower"] <= q["k_upper"]
        rows.append(row)
    return ComparabilityTable(rows, float(worst), r_allowed, bool(chord_ok), bool(bounds_ok))


# ---------------------------------------------------------------- claim constant


@dataclass
class ClaimResult:
    claim_k: float
    lengths: dict  # eta -> Kobayashi length of the offset in the slice
    base_length: float

    @property
    def spread(self) -> float:
        return spread(list(self.lengths.values()))


def claim_check(slice_dom: DomainSpec, base: BoundaryCurve, eta_grid, provider: Optional[MetricProvider] = None,
                disc=None) -> ClaimResult:
    """``K = max_eta l^kappa(alpha_eta) / l_e(alpha)`` measured in the slice."""
    if not base.length > 0:
        raise PreconditionError("claim check needs a base curve of positive length")
    provider = provider or disc_search_provider(slice_dom, *(() if disc is None else (disc,)))
    lengths = {}
    for eta in eta_grid:
        off = offset_curve(base, eta)
        lengths[float(eta)] = curve_kappa_length(provider, off.curve)
    return ClaimResult(max(lengths.values()) / base.length, lengths, base.length)


# ---------------------------------------------------------------- constants


@dataclass
class FittedConstants:
    """Empirical constants measured on one domain; labelled as fits, not proofs."""

    domain: str
    c_l: float
    c_prime: float
    claim_k: float
    c1: float
    c_omega: float
    r: float
    lambda_hat_max: float
    lemma_h: float
    lemma_n: float

    def to_dict(self) -> dict:
        return asdict(self)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "FittedConstants":
        path = Path(path)
        if not path.is_file():
            raise FitMissing(f"no fitted constants at {path}; run fit-constants first")
        return cls(**json.loads(path.read_text()))


def fit_connect_constant(slice_dom: DomainSpec, p, count: int, radius: float, config: ExperimentConfig,
                         seed: int) -> tuple[float, list]:
    """Smallest ``C`` with ``l_e <= C (|p - q| + missing^(1/2))`` on seeded boundary targets."""
    rows = []
    for q in sample_nearby_boundary(slice_dom, p, count, radius, seed):
        con = horizontal_connect(slice_dom, p, q, budget=config.shoot_budget, tol=config.shoot_tol,
                                 neighborhood=config.neighborhood, seed=seed)
        scale = ball_box_scale(slice_dom, p, q)
        rows.append({"q": q, "length": con.length, "scale": scale, "ratio": con.length / scale,
                     "residual": con.residual})
    return max(r["ratio"] for r in rows), rows


# ---------------------------------------------------------------- pipeline


def find_nonpsc_point(domain: DomainSpec, p=None, count: int = 512, seed: int = 42):
    """Given or discovered boundary point where the tangential Levi form is negative."""
    if p is not None:
        p = np.asarray(p, dtype=complex)
        spec = tangent_levi_spectrum(domain, p)
        if spec.classification != "non-pseudoconvex":
            raise NoNonPseudoconvexPoint(f"{p} is classified {spec.classification}")
        return p, spec
    zero = np.zeros(domain.n, dtype=complex)
    if abs(domain.rho.eval(zero)) < 1e-12:
        spec = tangent_levi_spectrum(domain, zero)
        if spec.classification == "non-pseudoconvex":
            return zero, spec
    best = None
    for z in sample_boundary(domain, count, seed):
        spec = tangent_levi_spectrum(domain, z)
        if spec.classification == "non-pseudoconvex" and (best is None or spec.eigenvalues[0] < best[1].eigenvalues[0]):
            best = (z, spec)
    if best is None:
        raise NoNonPseudoconvexPoint("no non-pseudoconvex boundary point found")
    return best


def canonical_phase(v: np.ndarray) -> np.ndarray:
    """Rotate so the largest component is real and positive."""
    k = int(np.argmax(np.round(np.abs(v), 12)))
    return v * np.exp(-1j * np.angle(v[k]))


@dataclass
class ExperimentReport:
    mode: str
    domain: str
    base_point: np.ndarray
    direction: np.ndarray
    levi_eigenvalue: float
    base_length: float
    per_eta: list
    arcs: list
    nodes: list
    verdict: dict
    claim: Optional[ClaimResult] = None
    extras: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "mode": self.mode,
            "domain": self.domain,
            "base_point": [[float(z.real), float(z.imag)] for z in self.base_point],
            "direction": [[float(z.real), float(z.imag)] for z in self.direction],
            "levi_eigenvalue": self.levi_eigenvalue,
            "base_length": self.base_length,
            "per_eta": self.per_eta,
            "claim_k": None if self.claim is None else self.claim.claim_k,
            "verdict": self.verdict,
            **self.extras,
        }


def _choose_target(slice_dom: DomainSpec, p, distance: float, seed: int) -> np.ndarray:
    """Boundary point at Euclidean distance close to (and below) ``distance`` from ``p``."""
    q = sample_nearby_boundary(slice_dom, p, 1, distance, seed, min_fraction=1.0)[0]
    for _ in range(20):
        d = np.linalg.norm(q - p)
        if abs(d - distance) < 1e-3 * distance:
            break
        q = retract_to_boundary(slice_dom, p + (q - p) * distance / d)
    return q


def visibility_violation_experiment(domain: DomainSpec, mode: str = "lambda_zero", p=None,
                                    config: ExperimentConfig = ExperimentConfig(),
                                    constants: Optional[FittedConstants] = None,
                                    lam: Optional[float] = None, eps: float = 0.5,
                                    with_claim: bool = True) -> ExperimentReport:
    """Offsets of a horizontal boundary curve and their certified geodesic defects over ``eta``.

    ``lambda_zero``: integral curve of the tangential field, verdict at
    level ``(lam, 0)`` (default ``lam = 1.1 max lambda_hat``).
    ``one_eps``: horizontal connection to a target close enough that the
    fitted bound ``2 K C' |p - q|^(1/2)`` stays below ``eps``; verdict at
    level ``(1, eps)``.
    """
    if mode not in ("lambda_zero", "one_eps"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "one_eps" and constants is None:
        raise FitMissing("one_eps mode needs fitted constants")
    p, spec = find_nonpsc_point(domain, p, seed=config.seed)
    v = canonical_phase(spec.eigenvectors[:, 0])
    sl = slice_domain(domain, p, v, config.slice_radius)
    origin = np.zeros(2, dtype=complex)
    per = (config.arc_points - 1) * config.nodes_per_interval
    extras: dict = {}
    if mode == "lambda_zero":
        base = tangential_curve_with_chord_arc(
            sl, origin, config.s, config.h, config.eps_chord, config.max_halvings, config.neighborhood,
            steps_multiple=per)
        base = base.subsample((len(base.t) - 1) // per)
    else:
        bound = (eps / (2 * constants.claim_k * constants.c_prime)) ** 2
        q = _choose_target(sl, origin, 0.9 * bound, config.seed)
        con = horizontal_connect(sl, origin, q, budget=config.shoot_budget, tol=config.shoot_tol,
                                 nodes=per + 1, neighborhood=config.neighborhood, seed=config.seed)
        base = con.curve
        chord = float(np.linalg.norm(q - origin))
        extras = {"target": [[float(z.real), float(z.imag)] for z in q], "target_distance": chord,
                  "distance_bound": bound, "predicted_eps": 2 * constants.claim_k * constants.c_prime * chord**0.5,
                  "connect_residual": con.residual}
    provider = disc_search_provider(domain, config.disc)
    cw = domain_c_omega(domain)
    per_eta, arcs, nodes = [], [], []
    for eta in config.eta_grid:
        off = offset_curve(base, eta)
        emb = embed_curve(off, sl)
        rep = geodesic_defect(emb, domain, provider, cw, config.arc_points)
        comp = comparability_check(emb, domain, provider, cw, config.arc_points, report=rep)
        lem = lemma22_check(base, off)
        ratio = rep.deltas / eta
        per_eta.append({
            "eta": float(eta), "lambda_hat": rep.lambda_hat, "eps_hat": rep.eps_hat, "c1": rep.c1,
            "max_delta": rep.max_boundary_distance, "min_delta": rep.min_boundary_distance,
            "collar_ratio_min": float(np.nanmin(ratio)), "collar_ratio_max": float(np.nanmax(ratio)),
            "r_measured": comp.r_measured, "comparable": comp.passes,
            "l_kappa": rep.rows[_full_arc(rep)]["l_kappa_upper"],
            "start": [[float(z.real), float(z.imag)] for z in emb.nodes[0]],
            "end": [[float(z.real), float(z.imag)] for z in emb.nodes[-1]],
            "replay": rep.flags["replay"], **lem,
        })
        for r in rep.rows:
            arcs.append({"eta": float(eta), "t1": r["t1"], "t2": r["t2"], "chord": r["euclid"], "l_e": r["l_e"],
                         "l_kappa_upper": r["l_kappa_upper"], "k_lower": r["k_lower"],
                         "k_upper": r["l_kappa_upper"], "ratio": r["ratio"]})
        for t, z, d in zip(emb.t, emb.nodes, rep.deltas):
            nodes.append({"eta": float(eta), "t": float(t), "z": z, "delta": float(d)})
    claim = claim_check(sl, base, config.eta_grid, disc=config.disc) if with_claim else None
    lam_hats = [r["lambda_hat"] for r in per_eta]
    escapes = all(r["max_delta"] <= (1 + COLLAR_SLACK) * r["eta"] for r in per_eta)
    if mode == "lambda_zero":
        level = (float(lam if lam is not None else 1.1 * max(lam_hats)), 0.0)
        certified = all(r["lambda_hat"] <= level[0] for r in per_eta)
    else:
        level = (1.0, float(eps))
        certified = all(r["eps_hat"] <= eps for r in per_eta)
    verdict = {
        "lambda": level[0], "epsilon": level[1], "certified_all_eta": bool(certified),
        "escapes_compacts": bool(escapes), "violated": bool(certified and escapes),
        "lambda_spread": spread(lam_hats), "c1_spread": spread([r["c1"] for r in per_eta]),
        "lemma_h_spread": spread([r["max_h_ratio"] for r in per_eta], NOISE_FLOOR),
        "lemma_n_spread": spread([r["max_n_ratio"] for r in per_eta], NOISE_FLOOR),
        "claim_spread": None if claim is None else claim.spread,
        "r_measured": max(r["r_measured"] for r in per_eta),
    }
    verdict["text"] = (f"visibility violated at level ({level[0]:.6g}, {level[1]:.6g})" if verdict["violated"]
                       else f"no violation certified at level ({level[0]:.6g}, {level[1]:.6g})")
    return ExperimentReport(mode, domain.name, p, v, float(spec.eigenvalues[0]), float(base.length),
                            per_eta, arcs, nodes, verdict, claim, extras)


def _full_arc(rep: GeodesicDefectReport) -> int:
    """Row index of the arc spanning the whole curve."""
    t0 = min(r["t1"] for r in rep.rows)
    t1 = max(r["t2"] for r in rep.rows)
    return next(k for k, r in enumerate(rep.rows) if r["t1"] == t0 and r["t2"] == t1)


def fit_constants(domain: DomainSpec, config: ExperimentConfig = ExperimentConfig(), p=None,
                  connect_samples: int = 10, connect_radius: float = 0.05,
                  report: Optional[ExperimentReport] = None) -> tuple[FittedConstants, ExperimentReport]:
    """Measure every constant the experiments consume on one domain."""
    report = report or visibility_violation_experiment(domain, "lambda_zero", p, config)
    p = report.base_point
    dnt = fit_dnt_constant(domain, p, DNTConfig(), config.disc)
    sl = slice_domain(domain, p, report.direction, config.slice_radius)
    c_prime, _ = fit_connect_constant(sl, np.zeros(2, dtype=complex), connect_samples, connect_radius,
                                      config, config.seed)
    pe = report.per_eta
    consts = FittedConstants(
        domain=domain.name,
        c_l=float(dnt.c_l),
        c_prime=float(c_prime),
        claim_k=float(report.claim.claim_k),
        c1=float(max(r["c1"] for r in pe)),
        c_omega=float(domain_c_omega(domain)),
        r=float(report.verdict["r_measured"]),
        lambda_hat_max=float(max(r["lambda_hat"] for r in pe)),
        lemma_h=float(max(r["max_h_ratio"] for r in pe)),
        lemma_n=float(max(r["max_n_ratio"] for r in pe)),
    )
    return consts, report
