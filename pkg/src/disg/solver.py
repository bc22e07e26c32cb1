"""Best response to a CGT opponent: value iteration on the (s=1, belief) grid.

With the opponent sharing exactly on ``C``, the best-response problem only
needs values on the s=1 slice: V(s=0, .) is identically zero, and any belief
outside ``C`` ends cooperation after the current step. Off-grid successor
beliefs are read off the grid by linear interpolation for two states and by
nearest grid point otherwise.
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List

import numpy as np
from scipy import sparse

from .errors import OracleViolation
from .model import MarkovModel, as_belief, joint_observation_probs
from .reward import MUTUAL_INFORMATION, GameParams, ReceptionReward
from .strategy import Region, SimplexGrid

logger = logging.getLogger(__name__)


def interpolation_weights(grid: SimplexGrid, beliefs: np.ndarray):
    """Grid indices and weights used to evaluate a grid function at arbitrary beliefs.

    Returns arrays of shape (m, 2) for two states (bracketing points) and
    (m, 1) otherwise (nearest point).
    """
    beliefs = np.atleast_2d(beliefs)
    if grid.num_states == 2:
        pos = np.clip(beliefs[:, 0], 0.0, 1.0) * grid.resolution
        lo = np.minimum(np.floor(pos).astype(int), grid.resolution - 1)
        w_hi = pos - lo
        return np.stack([lo, lo + 1], axis=1), np.stack([1.0 - w_hi, w_hi], axis=1)
    idx = grid.nearest(beliefs)
    return idx[:, None], np.ones((len(idx), 1))


def interpolate(grid: SimplexGrid, values: np.ndarray, beliefs) -> np.ndarray:
    idx, w = interpolation_weights(grid, beliefs)
    return (values[idx] * w).sum(axis=1)


def cooperative_successors(model: MarkovModel, beliefs: np.ndarray):
    """All (probability, next belief) pairs when both agents share.

    Returns ``probs`` of shape (m, K) and ``nexts`` of shape (m, K, |X|) with
    K = |Y1|*|Y2|; zero-probability outcomes carry a copy of the input belief.
    """
    beliefs = np.atleast_2d(beliefs)
    c1, c2 = model.channels
    lik = (c1[:, :, None] * c2[:, None, :]).reshape(model.num_states, -1)  # (x, K)
    post = beliefs[:, :, None] * lik[None, :, :]  # (m, x, K)
    probs = post.sum(axis=1)
    safe = np.where(probs > 0, probs, 1.0)
    post = post / safe[:, None, :]
    nexts = np.einsum("mxk,xy->mky", post, model.transition)
    dead = probs <= 0
    if dead.any():
        nexts[dead] = np.broadcast_to(beliefs[:, None, :], nexts.shape)[dead]
    return probs, nexts


@lru_cache(maxsize=64)
def successor_operator(model: MarkovModel, grid: SimplexGrid) -> sparse.csr_matrix:
    """Sparse matrix M with (M @ V)[i] = E[V(next belief) | grid point i, both share]."""
    probs, nexts = cooperative_successors(model, grid.points)
    m, k = probs.shape
    idx, w = interpolation_weights(grid, nexts.reshape(m * k, -1))
    rows = np.repeat(np.arange(m), k * idx.shape[1])
    vals = (w * probs.reshape(-1, 1)).ravel()
    mat = sparse.csr_matrix((vals, (rows, idx.ravel())), shape=(m, grid.size))
    mat.sum_duplicates()
    return mat


@lru_cache(maxsize=64)
def _grid_gain_cached(model: MarkovModel, grid: SimplexGrid, agent: int) -> np.ndarray:
    out = MUTUAL_INFORMATION.gain(model, grid.points, agent)
    out.setflags(write=False)
    return out


def grid_gain(model, grid, agent, reward: ReceptionReward = MUTUAL_INFORMATION) -> np.ndarray:
    if reward is MUTUAL_INFORMATION:
        return _grid_gain_cached(model, grid, agent)
    return reward.gain(model, grid.points, agent)


@dataclass
class ValueTable:
    grid: SimplexGrid
    values: np.ndarray
    opp_region: Region
    agent: int
    residual: float
    iterations: int
    converged: bool
    residuals: List[float] = field(default_factory=list, repr=False)

    def value(self, s: int, belief) -> float:
        """V(s, belief); the s=0 slice is identically zero."""
        if s == 0:
            return 0.0
        return float(interpolate(self.grid, self.values, as_belief(belief, self.grid.num_states))[0])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"x{i}" for i in range(self.grid.num_states)] + ["value"])
        for p, v in zip(self.grid.points, self.values):
            w.writerow([repr(float(c)) for c in p] + [repr(float(v))])
        return buf.getvalue()


def solve_best_response(
    model: MarkovModel,
    opp_region: Region,
    params: GameParams,
    agent: int,
    reward: ReceptionReward = MUTUAL_INFORMATION,
) -> ValueTable:
    """Value iteration for V(s=1, .) against an opponent sharing on ``opp_region``.

    Jacobi sweeps from V = 0; stops once the sup-norm change drops below
    ``params.vi_tolerance``. Hitting ``max_iterations`` first returns a table
    with ``converged=False`` rather than raising.
    """
    grid = opp_region.grid
    mask = opp_region.mask
    gain = np.where(mask, grid_gain(model, grid, agent, reward), 0.0)
    kernel = successor_operator(model, grid)
    cost = params.cost_of(agent)
    values = np.zeros(grid.size)
    residuals = []
    residual = np.inf
    it = 0
    if mask.any():
        for it in range(1, params.max_iterations + 1):
            share = -cost + params.delta * (kernel @ values)
            new = np.where(mask, gain + np.maximum(share, 0.0), 0.0)
            residual = float(np.max(np.abs(new - values)))
            residuals.append(residual)
            values = new
            if residual < params.vi_tolerance:
                break
    else:
        residual = 0.0
    converged = residual < params.vi_tolerance
    if not converged:
        logger.warning("value iteration stopped at residual %.3g after %d sweeps", residual, it)
    return ValueTable(grid, values, opp_region, agent, residual, it, converged, residuals)


def grid_q_values(model: MarkovModel, vtable: ValueTable, params: GameParams, reward=MUTUAL_INFORMATION):
    """(q_defect, q_share) at every grid point, s=1."""
    mask = vtable.opp_region.mask
    gain = np.where(mask, grid_gain(model, vtable.grid, vtable.agent, reward), 0.0)
    cont = successor_operator(model, vtable.grid) @ vtable.values
    cost = params.cost_of(vtable.agent)
    q_share = gain - cost + np.where(mask, params.delta * cont, 0.0)
    return gain, q_share


def expected_next_value(model: MarkovModel, vtable: ValueTable, belief) -> float:
    """E[V(1, next belief) | belief, both share], with exact successors."""
    probs, nexts = cooperative_successors(model, belief)
    vals = interpolate(vtable.grid, vtable.values, nexts[0])
    return float(probs[0] @ vals)


def q_values(model: MarkovModel, vtable: ValueTable, belief, params: GameParams, agent: int,
             reward: ReceptionReward = MUTUAL_INFORMATION):
    """(q_defect, q_share) at s=1 for an arbitrary belief."""
    if agent != vtable.agent:
        raise ValueError(f"table was solved for agent {vtable.agent}, not {agent}")
    belief = as_belief(belief, model.num_states)
    inside = vtable.opp_region.contains(belief)
    gain = float(reward.gain(model, belief, agent)[0]) if inside else 0.0
    q_share = gain - params.cost_of(agent)
    if inside:
        q_share += params.delta * expected_next_value(model, vtable, belief)
    return gain, q_share


def q_values_s0(params: GameParams, agent: int, action: int) -> float:
    """Q(s=0, ., a) = -a * c: after a deviation nobody shares and the future is worth zero."""
    return -action * params.cost_of(agent)


def greedy_region(model: MarkovModel, vtable: ValueTable, params: GameParams, reward=MUTUAL_INFORMATION) -> Region:
    """Grid beliefs where sharing is a best response (ties cooperate)."""
    q_defect, q_share = grid_q_values(model, vtable, params, reward)
    gap = q_share - q_defect
    inside = vtable.opp_region.mask
    # at zero cost the outside tie (both actions worth 0) resolves to defect
    members = (gap >= 0) & (inside | (gap > 0))
    region = Region(vtable.grid, members)
    if not region <= vtable.opp_region:
        bad = region.violations_of_subset(vtable.opp_region)
        raise OracleViolation(f"greedy region leaves the opponent region at grid points {bad[:10]}")
    return region


def reward_bound(model: MarkovModel, grid: SimplexGrid, agent: int, reward=MUTUAL_INFORMATION) -> float:
    """Largest reception gain over the grid."""
    return float(np.max(grid_gain(model, grid, agent, reward)))
