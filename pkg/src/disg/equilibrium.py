"""Cooperation-equilibrium regions: the best-response oracle, iterative refinement, absorbing boxes."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .model import MarkovModel, as_belief, conditional_mutual_information, other
from .reward import MUTUAL_INFORMATION, GameParams
from .solver import cooperative_successors, greedy_region, grid_gain, solve_best_response
from .strategy import Region, SimplexGrid, build_grid

POSITIVITY_THRESHOLD = 1e-9
BOX_SLACK = 1e-12


@dataclass
class OracleResult:
    region: Region
    converged: bool
    residual: float


def oracle(model: MarkovModel, C: Region, params: GameParams, agent: int, reward=MUTUAL_INFORMATION) -> OracleResult:
    """Beliefs where ``agent`` shares in its best response to a CGT opponent on ``C``."""
    table = solve_best_response(model, C, params, agent, reward)
    return OracleResult(greedy_region(model, table, params, reward), table.converged, table.residual)


def oracle_O(model: MarkovModel, C: Region, params: GameParams, agent: int, reward=MUTUAL_INFORMATION) -> Region:
    return oracle(model, C, params, agent, reward).region


@dataclass
class ItraReport:
    region: Region
    halted_fixed_point: bool
    iterations_used: int
    chain: List[int]
    tainted: bool = False
    agent: int = 1

    def to_json(self) -> dict:
        g = self.region.grid
        return {
            "num_states": g.num_states,
            "resolution": g.resolution,
            "agent": self.agent,
            "halted_fixed_point": self.halted_fixed_point,
            "iterations_used": self.iterations_used,
            "chain": list(self.chain),
            "tainted": self.tainted,
            "region_size": len(self.region),
            "region_members": [int(i) for i in self.region.members],
            "region_runs": self.region.runs() if g.num_states == 2 else None,
        }


def itra(
    model: MarkovModel,
    params: GameParams,
    k: int,
    grid: Optional[SimplexGrid] = None,
    agent: int = 1,
    start: Optional[Region] = None,
    reward=MUTUAL_INFORMATION,
) -> ItraReport:
    """Iterative refinement C <- O^n(O^{-n}(C)) from the full simplex (or ``start``).

    Halts as soon as an iterate is a fixed point. If a best-response solve
    fails to converge the run stops and reports the last clean iterate with
    ``tainted=True``.
    """
    if k < 1:
        raise ValueError("k must be positive")
    if start is None:
        grid = grid or build_grid(model.num_states, 200)
        start = Region.full(grid)

    def refine(C):
        inner = oracle(model, C, params, other(agent), reward)
        if not inner.converged:
            return None
        outer = oracle(model, inner.region, params, agent, reward)
        return outer.region if outer.converged else None

    chain = [len(start)]
    current = refine(start)
    if current is None:
        return ItraReport(start, False, 0, chain, tainted=True, agent=agent)
    chain.append(len(current))
    for i in range(1, k + 1):
        nxt = refine(current)
        if nxt is None:
            return ItraReport(current, False, i, chain, tainted=True, agent=agent)
        if nxt == current:
            return ItraReport(current, True, i, chain, agent=agent)
        if i == k:
            break
        current = nxt
        chain.append(len(current))
    return ItraReport(current, False, k, chain, agent=agent)


@dataclass
class EquilibriumCheck:
    is_equilibrium: bool
    witnesses: dict = field(default_factory=dict)

    def __bool__(self):
        return self.is_equilibrium


def is_equilibrium_region(model: MarkovModel, C: Region, params: GameParams, reward=MUTUAL_INFORMATION) -> EquilibriumCheck:
    """True iff O^1(C) = C = O^2(C); witnesses list offending grid indices per agent."""
    witnesses = {}
    for agent in (1, 2):
        image = oracle_O(model, C, params, agent, reward)
        diff = np.flatnonzero(image.mask != C.mask)
        if diff.size:
            witnesses[agent] = [int(i) for i in diff]
    return EquilibriumCheck(not witnesses, witnesses)


@dataclass
class AbsorbingReport:
    lam_min: np.ndarray
    lam_max: np.ndarray
    region: Region
    is_absorbing: bool
    r_inf: float
    is_positive: bool
    suggested_cost: Optional[float]

    def to_json(self) -> dict:
        return {
            "box": [[float(a), float(b)] for a, b in zip(self.lam_min, self.lam_max)],
            "region_size": len(self.region),
            "region_members": [int(i) for i in self.region.members],
            "is_absorbing": self.is_absorbing,
            "r_inf": self.r_inf,
            "is_positive": self.is_positive,
            "suggested_cost": self.suggested_cost,
        }


def in_box(points: np.ndarray, lam_min: np.ndarray, lam_max: np.ndarray, slack: float = BOX_SLACK) -> np.ndarray:
    return np.all((points >= lam_min - slack) & (points <= lam_max + slack), axis=-1)


def absorbing_box(
    model: MarkovModel,
    params: GameParams,
    epsilon_tilde: float,
    grid: Optional[SimplexGrid] = None,
    reward=MUTUAL_INFORMATION,
) -> AbsorbingReport:
    """Column-wise min/max box of the kernel, its grid points, and the positive-absorbing test."""
    if not 0.0 < epsilon_tilde <= params.delta:
        raise ValueError(f"epsilon_tilde must lie in (0, delta], got {epsilon_tilde}")
    grid = grid or build_grid(model.num_states, 200)
    lam_min = model.transition.min(axis=0)
    lam_max = model.transition.max(axis=0)
    mask = in_box(grid.points, lam_min, lam_max)
    region = Region(grid, mask)
    if mask.any():
        probs, nexts = cooperative_successors(model, grid.points[mask])
        reachable = probs > 0
        is_absorbing = bool(np.all(in_box(nexts, lam_min, lam_max)[reachable]))
        r_inf = float(min(np.min(grid_gain(model, grid, n, reward)[mask]) for n in (1, 2)))
    else:
        is_absorbing = False
        r_inf = 0.0
    is_positive = r_inf > POSITIVITY_THRESHOLD
    suggested = epsilon_tilde * r_inf if is_positive else None
    return AbsorbingReport(lam_min, lam_max, region, is_absorbing, r_inf, is_positive, suggested)


def corollary_dependence_check(model: MarkovModel, belief, agent: int) -> bool:
    """True iff X and the other agent's observation are conditionally dependent given one's own."""
    belief = as_belief(belief, model.num_states)
    return conditional_mutual_information(model, belief, agent) > POSITIVITY_THRESHOLD
