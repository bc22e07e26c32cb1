"""Monte-Carlo tree search for the best response, with exact belief updates instead of particles.

Nodes are action-observation histories of the planning agent. Since the
sharing flag and belief are exact, every node carries its (s, belief) pair;
a node with s=0 is worth exactly zero and is never expanded.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from .model import EPSILON, MarkovModel, as_belief, other
from .reward import GameParams
from .strategy import Region

# UCB weight in bits; None switches to the empirical return range at the root
DEFAULT_EXPLORATION = 0.01


class _Kernel:
    """Scalar fast paths over plain Python lists (tree search is call-bound, not array-bound)."""

    def __init__(self, model: MarkovModel, agent: int):
        self.d = model.num_states
        self.T = model.transition.tolist()
        self.T_cdf = [list(np.cumsum(row)) for row in model.transition]
        self.own = model.channel(agent).tolist()
        self.opp = model.channel(other(agent)).tolist()
        self.own_cdf = [list(np.cumsum(row)) for row in model.channel(agent)]
        self.opp_cdf = [list(np.cumsum(row)) for row in model.channel(other(agent))]
        self.ny = len(self.own[0])
        self.nz = len(self.opp[0])

    @staticmethod
    def draw(cdf, u):
        u *= cdf[-1]
        for i, c in enumerate(cdf):
            if u < c:
                return i
        return len(cdf) - 1

    def gain(self, b) -> float:
        total = 0.0
        own, opp = self.own, self.opp
        for y in range(self.ny):
            p_y = 0.0
            p_xy = [b[x] * own[x][y] for x in range(self.d)]
            p_y = sum(p_xy)
            if p_y <= 1e-15:
                continue
            for z in range(self.nz):
                p_yz = sum(p_xy[x] * opp[x][z] for x in range(self.d))
                if p_yz <= 1e-15:
                    continue
                for x in range(self.d):
                    p = p_xy[x] * opp[x][z]
                    if p > 1e-15:
                        total += p * math.log2(p * p_y / (p_xy[x] * p_yz))
        return max(total, 0.0)

    def update(self, b, y, z):
        post = [b[x] * self.own[x][y] * (1.0 if z is EPSILON else self.opp[x][z]) for x in range(self.d)]
        norm = sum(post)
        return tuple(
            sum(post[x] * self.T[x][x2] for x in range(self.d)) / norm for x2 in range(self.d)
        )


@dataclass
class _Node:
    s: int
    belief: tuple
    opp_share: int
    gain: float
    visits: int = 0
    n: list = field(default_factory=lambda: [0, 0])
    q: list = field(default_factory=lambda: [0.0, 0.0])
    children: Dict[tuple, "_Node"] = field(default_factory=dict)


@dataclass
class PomcpResult:
    action: int
    q_estimates: Tuple[float, float]
    visits: Tuple[int, int]


class Planner:
    def __init__(
        self,
        model: MarkovModel,
        opp_region: Region,
        params: GameParams,
        agent: int,
        horizon: int,
        rng: random.Random,
        rollout: str = "mirror",
        exploration: Optional[float] = DEFAULT_EXPLORATION,
    ):
        if rollout not in ("mirror", "defect"):
            raise ValueError(f"unknown rollout policy {rollout!r}")
        self.k = _Kernel(model, agent)
        self.region = opp_region
        self.grid = opp_region.grid
        self.mask = opp_region.mask.tolist()
        self.cost = params.cost_of(agent)
        self.delta = params.delta
        self.horizon = horizon
        self.rng = rng
        self.rollout_policy = rollout
        self.exploration = exploration
        self.lo = math.inf
        self.hi = -math.inf

    def member(self, b) -> int:
        if self.grid.num_states == 2:
            idx = math.ceil(b[0] * self.grid.resolution - 0.5 - 1e-12)
            return int(self.mask[min(max(idx, 0), self.grid.resolution)])
        return int(self.region.contains(np.array(b)))

    def node(self, s, b) -> _Node:
        share = self.member(b) if s == 1 else 0
        return _Node(s, b, share, self.k.gain(b) if share else 0.0)

    def step(self, x, s, b, share, a):
        """Sample one transition; returns (x', s', b', observation key)."""
        rng, k = self.rng, self.k
        y = k.draw(k.own_cdf[x], rng.random())
        z = k.draw(k.opp_cdf[x], rng.random()) if share else EPSILON
        x2 = k.draw(k.T_cdf[x], rng.random())
        s2 = int(s == 1 and a == 1 and share == 1)
        return x2, s2, k.update(b, y, z), (y, z)

    def rollout(self, x, s, b, depth) -> float:
        total = 0.0
        disc = 1.0
        while depth < self.horizon and s == 1:
            share = self.member(b)
            a = share if self.rollout_policy == "mirror" else 0
            total += disc * ((self.k.gain(b) if share else 0.0) - a * self.cost)
            x, s, b, _ = self.step(x, s, b, share, a)
            disc *= self.delta
            depth += 1
        return total

    def select(self, node: _Node, root: bool) -> int:
        untried = [a for a in (0, 1) if node.n[a] == 0]
        if untried:
            return untried[0] if len(untried) == 1 else self.rng.choice(untried)
        weight = self.exploration
        if weight is None:
            weight = max(self.hi - self.lo, 1e-12)
        log_n = math.log(node.visits)
        scores = [node.q[a] + weight * math.sqrt(log_n / node.n[a]) for a in (0, 1)]
        return 0 if scores[0] > scores[1] else 1

    def simulate(self, x, node: _Node, depth: int, root: bool = False) -> float:
        if depth >= self.horizon or node.s == 0:
            return 0.0
        a = self.select(node, root)
        ret = node.gain - a * self.cost
        x2, s2, b2, key = self.step(x, node.s, node.belief, node.opp_share, a)
        if s2 == 1:
            child_key = (a,) + key
            child = node.children.get(child_key)
            if child is None:
                node.children[child_key] = self.node(s2, b2)
                ret += self.delta * self.rollout(x2, s2, b2, depth + 1)
            else:
                ret += self.delta * self.simulate(x2, child, depth + 1)
        node.visits += 1
        node.n[a] += 1
        node.q[a] += (ret - node.q[a]) / node.n[a]
        if root:
            self.lo = min(self.lo, ret)
            self.hi = max(self.hi, ret)
        return ret


def pomcp_plan(
    model: MarkovModel,
    opp_region: Region,
    params: GameParams,
    belief,
    s: int,
    sim_budget: int,
    horizon: int,
    seed: int,
    agent: int = 1,
    rollout: str = "mirror",
    exploration: Optional[float] = DEFAULT_EXPLORATION,
) -> PomcpResult:
    """Plan agent ``agent``'s action at (s, belief) against a CGT opponent on ``opp_region``.

    Returns the root action with the larger mean return and both means
    (q_defect, q_share). After a deviation (s=0) the answer is exact: defect,
    with means (0, -c).

    ``rollout="mirror"`` shares exactly where the opponent does, so leaves are
    valued by staying on the cooperative path; ``"defect"`` ends cooperation at
    the leaf and biases the share estimate downward.
    """
    if sim_budget < 1:
        raise ValueError("sim_budget must be >= 1")
    b = tuple(float(v) for v in as_belief(belief, model.num_states))
    cost = params.cost_of(agent)
    if s == 0:
        return PomcpResult(0, (0.0, -cost), (0, 0))
    rng = random.Random(seed)
    planner = Planner(model, opp_region, params, agent, horizon, rng, rollout, exploration)
    root = planner.node(1, b)
    kernel = planner.k
    for _ in range(sim_budget):
        x = kernel.draw(list(np.cumsum(b)), rng.random())
        planner.simulate(x, root, 0, root=True)
    q = (root.q[0], root.q[1])
    return PomcpResult(int(q[1] > q[0]), q, (root.n[0], root.n[1]))
