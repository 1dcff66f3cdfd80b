"""Acceptance criteria, one test each; every test prints a single PASS/FAIL line."""
import subprocess
import sys
import time

import numpy as np
import pytest

from kobvis.config import DiscSearchConfig, ExperimentConfig
from kobvis.curves import ball_box_scale, horizontal_connect, sample_nearby_boundary
from kobvis.distance import kobayashi_distance_upper
from kobvis.domains import ball as make_ball, builtin
from kobvis.geometry import (
    boundary_project,
    contains,
    inner_normal,
    levi_form,
    sample_boundary,
    signed_distance,
    slice_domain,
    tangent_levi_spectrum,
)
from kobvis.metric import (
    disc_search_provider,
    exact_provider,
    kappa_exact_ball,
    kappa_exact_disc,
    kappa_exact_polydisc,
    kappa_lower,
    kappa_upper,
)
from kobvis.polynomial import to_complex, to_real
from kobvis.visibility import NOISE_FLOOR, fit_connect_constant, spread, visibility_violation_experiment

from .conftest import interior_samples

# ball-box constant fitted on the seed-42 sample of 10 targets at radius 0.05 (regression pin)
PINNED_C_PRIME = 1.6366052934850568


def report(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\nACCEPTANCE {number:>2} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


def random_vectors(rng, count, n):
    return rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))


# ---------------------------------------------------------------- 1


def test_01_oracle_sandwich(capsys):
    start = time.perf_counter()
    oracles = {"disc": kappa_exact_disc, "ball": kappa_exact_ball, "polydisc_smooth": kappa_exact_polydisc}
    worst = {}
    ok = True
    for k, (name, exact_fn) in enumerate(oracles.items()):
        dom = builtin(name)
        rng = np.random.default_rng(100 + k)
        zs = interior_samples(dom, 100, seed=200 + k)
        vs = random_vectors(rng, 100, dom.n)
        ratios = []
        for z, v in zip(zs, vs):
            lo = kappa_lower(dom, z, v)
            ex = float(np.sum(exact_fn(z, v))) if dom.n == 1 else float(exact_fn(z, v))
            up = kappa_upper(dom, z, v)
            ok &= lo <= ex <= 1.000001 * up and up <= 2 * ex
            ratios.append(up / ex)
        worst[name] = (min(ratios), max(ratios))
    elapsed = time.perf_counter() - start
    ok &= elapsed <= 60
    detail = "; ".join(f"{n} upper/exact in [{a:.6f}, {b:.4f}]" for n, (a, b) in worst.items())
    report(capsys, 1, ok, f"{detail}; {elapsed:.1f} s (limit 60 s)")


# ---------------------------------------------------------------- 2


def test_02_distance_oracle(capsys):
    start = time.perf_counter()
    ball = builtin("ball")
    z, w = np.zeros(2), np.array([0.9, 0])
    ref = np.arctanh(0.9)
    d_exact = kobayashi_distance_upper(exact_provider("exact_ball", ball), ball, z, w)
    d_disc = kobayashi_distance_upper(disc_search_provider(ball), ball, z, w)
    elapsed = time.perf_counter() - start
    ok = ref <= d_exact <= 1.01 * ref and ref <= d_disc <= 2 * ref and elapsed <= 120
    report(capsys, 2, ok, f"exact provider {d_exact:.6f} in [{ref:.4f}, {1.01 * ref:.4f}]; "
                          f"disc search {d_disc:.6f} in [{ref:.4f}, {2 * ref:.4f}]; {elapsed:.1f} s (limit 120 s)")


# ---------------------------------------------------------------- 3


def _fd_levi(rho, p, v, h):
    """Quarter Laplacian of t -> rho(p + t v) over the complex t-plane, fourth-order stencil."""
    f = lambda t: float(rho.eval(p + t * v))  # noqa: E731
    tot = 0.0
    for d in (1.0, 1j):
        tot += (-f(2 * h * d) + 16 * f(h * d) - 30 * f(0) + 16 * f(-h * d) - f(-2 * h * d)) / (12 * h * h)
    return tot / 4


def _geometry_invariants(dom, seed):
    rng = np.random.default_rng(seed)
    eta0 = dom.collar_eta0
    worst = {"idempotence": 0.0, "eikonal": 0.0, "hermitian": 0.0, "levi_fd": 0.0}
    for p in sample_boundary(dom, 12, seed=seed):
        nu = inner_normal(dom, p)
        for t in (-0.8, -0.3, 0.3, 0.8):
            q, _ = boundary_project(dom, p + t * eta0 * nu)
            worst["idempotence"] = max(worst["idempotence"], float(np.linalg.norm(q - p)))
        z = p + 0.5 * eta0 * nu
        x, h = to_real(z), 1e-5
        grad = np.zeros(x.size)
        for a in range(x.size):
            e = np.zeros(x.size)
            e[a] = h
            grad[a] = (signed_distance(dom, to_complex(x + e)) - signed_distance(dom, to_complex(x - e))) / (2 * h)
        worst["eikonal"] = max(worst["eikonal"], abs(np.linalg.norm(grad) - 1))
    zs = interior_samples(dom, 100, seed=seed)
    L = dom.rho.levi_matrix(zs)
    asym = np.max(np.abs(L - np.conj(np.swapaxes(L, -1, -2))), axis=(-1, -2))
    scale = np.maximum(np.max(np.abs(L), axis=(-1, -2)), 1e-300)
    worst["hermitian"] = float(np.max(asym / scale))
    for z in zs[:20]:
        v = random_vectors(rng, 1, dom.n)[0]
        v /= np.linalg.norm(v)
        exact = levi_form(dom, z, v)
        fd = _fd_levi(dom.rho, z, v, 1e-3)
        worst["levi_fd"] = max(worst["levi_fd"], abs(fd - exact) / max(abs(exact), 1.0))
    return worst


def test_03_boundary_geometry(capsys):
    start = time.perf_counter()
    limits = {"idempotence": 1e-6, "eikonal": 1e-4, "hermitian": 1e-10, "levi_fd": 1e-5}
    parts, ok = [], True
    for k, name in enumerate(("disc", "ball", "polydisc_smooth", "model_nonpsc")):
        w = _geometry_invariants(builtin(name), seed=30 + k)
        ok &= all(w[key] <= lim for key, lim in limits.items())
        parts.append(f"{name} " + ",".join(f"{key}={w[key]:.1e}" for key in limits))
    elapsed = time.perf_counter() - start
    ok &= elapsed <= 30
    report(capsys, 3, ok, f"{'; '.join(parts)}; {elapsed:.1f} s (limit 30 s)")


# ---------------------------------------------------------------- 4


def test_04_levi_classification(capsys):
    model, ball = builtin("model_nonpsc"), builtin("ball")
    s0 = tangent_levi_spectrum(model, np.zeros(2))
    ball_eigs = np.array([tangent_levi_spectrum(ball, p).eigenvalues[0] for p in sample_boundary(ball, 100, seed=4)])
    ok = abs(s0.eigenvalues[0] + 1) <= 1e-6 and np.all(np.abs(ball_eigs - 1) <= 1e-6)
    report(capsys, 4, ok, f"model origin {s0.eigenvalues[0]:.9f}; ball over 100 samples "
                          f"[{ball_eigs.min():.9f}, {ball_eigs.max():.9f}]")


# ---------------------------------------------------------------- 5-7 share one default pipeline run


@pytest.fixture(scope="module")
def pipeline():
    start = time.perf_counter()
    rep = visibility_violation_experiment(builtin("model_nonpsc"), "lambda_zero", config=ExperimentConfig())
    return rep, time.perf_counter() - start


def test_05_counterexample_pipeline(pipeline, capsys):
    rep, elapsed = pipeline
    pe = rep.per_eta
    collar = (min(r["collar_ratio_min"] for r in pe), max(r["collar_ratio_max"] for r in pe))
    c1_spread = spread([r["c1"] for r in pe])
    lam_spread = spread([r["lambda_hat"] for r in pe])
    escape = max(r["max_delta"] / r["eta"] for r in pe)
    ok = (0.95 <= collar[0] and collar[1] <= 1.05 and c1_spread <= 2 and lam_spread <= 2 and escape <= 1.05
          and rep.verdict["violated"] and elapsed <= 600)
    report(capsys, 5, ok, f"collar ratio [{collar[0]:.6f}, {collar[1]:.6f}]; C1 spread {c1_spread:.3f}; "
                          f"lambda_hat spread {lam_spread:.3f} (max {max(r['lambda_hat'] for r in pe):.4f}); "
                          f"max delta/eta {escape:.6f}; {rep.verdict['text']}; {elapsed:.0f} s (limit 600 s)")


def test_06_claim_constant(pipeline, capsys):
    rep, _ = pipeline
    claim = rep.claim
    ok = claim.spread <= 1.5 and np.isfinite(claim.claim_k)
    report(capsys, 6, ok, f"K_hat {claim.claim_k:.4f}; offset lengths spread {claim.spread:.4f} (limit 1.5)")


def test_07_lemma_constants(pipeline, capsys):
    rep, _ = pipeline
    h = [r["max_h_ratio"] for r in rep.per_eta]
    n = [r["max_n_ratio"] for r in rep.per_eta]
    hs, ns = spread(h, NOISE_FLOOR), spread(n, NOISE_FLOOR)
    ok = hs <= 2 and ns <= 2 and all(np.isfinite(h)) and all(np.isfinite(n))
    report(capsys, 7, ok, f"horizontal ratio in [{min(h):.4f}, {max(h):.4f}] spread {hs:.3f}; "
                          f"normal ratio in [{min(n):.3g}, {max(n):.3g}] spread {ns:.3f}")


# ---------------------------------------------------------------- 8


def test_08_horizontal_connection(capsys):
    cfg = ExperimentConfig()
    model = builtin("model_nonpsc")
    sl = slice_domain(model, np.zeros(2), np.array([0, 1 + 0j]), cfg.slice_radius)
    p = np.zeros(2, dtype=complex)
    c_prime, rows = fit_connect_constant(sl, p, 10, 0.05, cfg, seed=42)
    residual = max(r["residual"] for r in rows)
    fresh = sample_nearby_boundary(sl, p, 10, 0.05, seed=7)
    worst = 0.0
    for q in fresh:
        con = horizontal_connect(sl, p, q, budget=cfg.shoot_budget, tol=cfg.shoot_tol,
                                 neighborhood=cfg.neighborhood, seed=7)
        residual = max(residual, con.residual)
        worst = max(worst, con.length / ball_box_scale(sl, p, q))
    ok = residual <= 1e-5 and worst <= 1.2 * PINNED_C_PRIME and c_prime == pytest.approx(PINNED_C_PRIME, rel=0.01)
    report(capsys, 8, ok, f"max endpoint residual {residual:.2e}; refit C' {c_prime:.4f} (pinned {PINNED_C_PRIME:.4f}); "
                          f"fresh-sample worst l_e/scale {worst:.4f} <= {1.2 * PINNED_C_PRIME:.4f}")


# ---------------------------------------------------------------- 9


def test_09_determinism(tmp_path, capsys):
    args = ["--domain", "model_nonpsc", "--seed", "42", "--eta-grid", "1e-2,1e-3", "--s", "0.1",
            "--arc-points", "4", "--nodes-per-interval", "4"]
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        proc = subprocess.run([sys.executable, "-m", "kobvis", "visibility", *args, "--out", str(out)],
                              capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        outs.append(out)
    same = {name: (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
            for name in ("arcs.csv", "curve_nodes.csv", "report.json")}
    report(capsys, 9, all(same.values()), "byte-identical: " + ", ".join(f"{k}={v}" for k, v in same.items()))


# ---------------------------------------------------------------- 10


def test_10_monotonicity(capsys):
    ball, ball3 = builtin("ball"), builtin("ball3")
    big = make_ball(2, 2.0)
    rng = np.random.default_rng(10)
    zs = interior_samples(ball, 50, seed=11)
    vs = random_vectors(rng, 50, 2)
    rel_tol = DiscSearchConfig().rel_tol
    assert np.all(contains(big, zs))
    inclusion = -np.inf
    for z, v in zip(zs, vs):
        small = kappa_upper(ball, z, v)
        # the radius-2 ball is the unit ball scaled by 2
        large = float(kappa_exact_ball(z / 2, v / 2))
        inclusion = max(inclusion, large - small * (1 + rel_tol))
    slice_excess = -np.inf
    for z, v in zip(zs, vs):
        lo_dim = kappa_upper(ball, z, v)
        hi_dim = kappa_upper(ball3, np.append(z, 0), np.append(v, 0))
        slice_excess = max(slice_excess, hi_dim - lo_dim * (1 + rel_tol))
    ok = inclusion <= 1e-6 and slice_excess <= 1e-6
    report(capsys, 10, ok, f"inclusion worst signed excess {inclusion:.2e}; slice worst signed excess {slice_excess:.2e} "
                           f"(additive slack 1e-6 beyond relative {rel_tol:g})")
