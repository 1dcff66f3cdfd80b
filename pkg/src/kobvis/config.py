"""Tunable numerical parameters, grouped per subsystem."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional


@dataclass(frozen=True)
class DiscSearchConfig:
    radii: int = 24
    angles: int = 64
    # highest power of lam in the disc family
    degree: int = 2
    # grid checks in the coefficient search; None means 50 per real parameter, at least 200
    budget: Optional[int] = None
    rel_tol: float = 1e-6
    shrink: float = 1e-3
    initial_step: float = 0.25
    min_step: float = 1e-6
    # denser grid used once to re-check the final radius
    verify_radii: int = 96
    verify_angles: int = 256

    def evaluation_budget(self, params: int) -> int:
        return self.budget if self.budget is not None else max(200, 50 * params)


@dataclass(frozen=True)
class GraphConfig:
    samples: int = 4096
    neighbors: int = 12
    edge_checks: int = 16
    edge_nodes: int = 5
    smoothing_sweeps: int = 60
    path_nodes: int = 33
    seed: int = 42


@dataclass(frozen=True)
class DNTConfig:
    exponent: float = 0.75
    deltas: tuple = (1e-4, 3.16e-4, 1e-3, 3.16e-3, 1e-2, 3.16e-2, 1e-1)


@dataclass(frozen=True)
class ExperimentConfig:
    eta_grid: tuple = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)
    s: float = 0.2
    h: float = 1e-3
    arc_points: int = 10
    # nodes per arc-grid interval of the curve used for Kobayashi lengths (even, for Simpson)
    nodes_per_interval: int = 8
    eps_chord: float = 0.05
    max_halvings: int = 6
    slice_radius: float = 0.6
    neighborhood: float = 0.45
    shoot_budget: int = 600
    shoot_tol: float = 1e-5
    seed: int = 42
    disc: DiscSearchConfig = field(default_factory=DiscSearchConfig)

    def to_dict(self) -> dict:
        return asdict(self)
