"""Built-in test domains and the JSON interchange format."""
from __future__ import annotations

import json
from functools import lru_cache
from pathlib import Path

import numpy as np

from .geometry import DomainSpec, make_domain
from .polynomial import Polynomial, abs_power, monomial

BUILTINS = ("ball", "polydisc_smooth", "model_nonpsc", "disc", "ball3")

# exponent m in |z_1|^(2m) + |z_2|^(2m) < 1
POLYDISC_POWER = 32


def ball_polynomial(n: int, radius: float = 1.0) -> Polynomial:
    mons = [abs_power(n, j, 1) for j in range(n)]
    mons.append(monomial(n, [0] * n, [0] * n, -radius**2))
    return Polynomial.from_monomials(n, mons)


def model_polynomial() -> Polynomial:
    """Re z1 + |z1|^2 - |z2|^2 + |z2|^4: origin is a non-pseudoconvex boundary point."""
    return Polynomial.from_monomials(2, [
        monomial(2, [1, 0], [0, 0], 0.5),
        monomial(2, [0, 0], [1, 0], 0.5),
        abs_power(2, 0, 1),
        abs_power(2, 1, 1, -1.0),
        abs_power(2, 1, 2),
    ])


def polydisc_polynomial(m: int = POLYDISC_POWER) -> Polynomial:
    return Polynomial.from_monomials(2, [
        abs_power(2, 0, m), abs_power(2, 1, m), monomial(2, [0, 0], [0, 0], -1.0)])


def ball(n: int = 2, radius: float = 1.0, validate: bool = True) -> DomainSpec:
    name = "ball" if (n, radius) == (2, 1.0) else f"ball{n}" if radius == 1.0 else f"ball{n}_r{radius:g}"
    half = 1.1 * radius
    return make_domain(name, ball_polynomial(n, radius), -half * np.ones(2 * n), half * np.ones(2 * n),
                       diameter=2 * radius, validate=validate)


def disc() -> DomainSpec:
    """Unit disc in C (a one-variable testing mode for the metric oracles)."""
    return make_domain("disc", ball_polynomial(1), -1.1 * np.ones(2), 1.1 * np.ones(2), diameter=2.0)


def polydisc_smooth() -> DomainSpec:
    return make_domain("polydisc_smooth", polydisc_polynomial(), -1.1 * np.ones(4), 1.1 * np.ones(4))


def model_nonpsc() -> DomainSpec:
    # {rho < 0} lies in (x1 + 1/2)^2 + y1^2 < 1/2 and |z2|^2 < (1 + sqrt 2)/2
    return make_domain("model_nonpsc", model_polynomial(),
                       [-1.25, -1.15, -0.75, -1.15], [0.25, 1.15, 0.75, 1.15])


@lru_cache(maxsize=None)
def builtin(name: str) -> DomainSpec:
    makers = {
        "ball": ball,
        "ball3": lambda: ball(3),
        "disc": disc,
        "polydisc_smooth": polydisc_smooth,
        "model_nonpsc": model_nonpsc,
    }
    if name not in makers:
        raise KeyError(f"unknown builtin domain {name!r}; choose from {', '.join(BUILTINS)}")
    return makers[name]()


def domain_to_dict(domain: DomainSpec) -> dict:
    return {
        "name": domain.name,
        "dimension": domain.n,
        "monomials": domain.polynomial.to_monomials(),
        "bbox": {"min": domain.bbox_min.tolist(), "max": domain.bbox_max.tolist()},
        "collar_eta0": domain.collar_eta0,
        "diameter": domain.diameter,
    }


def domain_from_dict(doc: dict, validate: bool = True) -> DomainSpec:
    try:
        n = int(doc["dimension"])
        poly = Polynomial.from_monomials(n, doc["monomials"])
        bbox = doc["bbox"]
        return make_domain(str(doc["name"]), poly, bbox["min"], bbox["max"],
                           collar_eta0=doc.get("collar_eta0"), diameter=doc.get("diameter"),
                           validate=validate)
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed domain document: {exc!r}") from exc


def load_domain(source: str) -> DomainSpec:
    """Builtin name or path to a JSON domain document."""
    if source in BUILTINS:
        return builtin(source)
    path = Path(source)
    if not path.is_file():
        raise FileNotFoundError(f"no builtin or file named {source!r}")
    with path.open() as fh:
        return domain_from_dict(json.load(fh))


def save_domain(domain: DomainSpec, path) -> None:
    Path(path).write_text(json.dumps(domain_to_dict(domain), indent=2))
