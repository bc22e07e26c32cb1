"""Stage rewards: reception gain, the CGT-form reward and the cost-adjusted stage reward."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .model import (
    EPSILON,
    MarkovModel,
    as_belief,
    conditional_mutual_information_batch,
    joint_distribution,
    pathwise_log_ratio,
)
from .strategy import Region


@dataclass(frozen=True)
class GameParams:
    delta: float = 0.9
    cost: Tuple[float, float] = (0.027, 0.027)
    vi_tolerance: float = 1e-10
    max_iterations: int = 10_000

    def __post_init__(self):
        object.__setattr__(self, "cost", tuple(float(c) for c in self.cost))
        if not 0.0 <= self.delta < 1.0:
            raise ValueError(f"delta must lie in [0, 1), got {self.delta}")
        if len(self.cost) != 2 or min(self.cost) < 0:
            raise ValueError(f"cost must be two nonnegative reals, got {self.cost}")
        if self.vi_tolerance <= 0:
            raise ValueError("vi_tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")

    def cost_of(self, agent: int) -> float:
        return self.cost[agent - 1]

    @classmethod
    def symmetric(cls, cost: float, **kw) -> "GameParams":
        return cls(cost=(cost, cost), **kw)


class ReceptionReward:
    """Reward paid to the receiving agent for a realization (x, y^n, z^{-n}) under a belief.

    Subclasses must satisfy, for every belief:
      (A) the expectation under a sharing opponent is nonnegative;
      (B) the expectation given z = epsilon is zero.
    ``gain`` returns the expectation under a sharing opponent; the default
    enumerates ``pointwise`` over the joint distribution.
    """

    def pointwise(self, model, belief, state, own_obs, signal, agent) -> float:
        raise NotImplementedError

    def gain(self, model: MarkovModel, beliefs, agent: int) -> np.ndarray:
        beliefs = np.atleast_2d(np.asarray(beliefs, dtype=float))
        out = np.empty(len(beliefs))
        for i, b in enumerate(beliefs):
            joint = joint_distribution(model, b, agent)
            total = 0.0
            for (x, y, z), p in np.ndenumerate(joint):
                if p > 0:
                    total += p * self.pointwise(model, b, x, y, z, agent)
            out[i] = total
        return out


class MutualInformationReward(ReceptionReward):
    """Log-likelihood-ratio reward; its expectation is I(X; Y^{-n} | Y^n) in bits."""

    def pointwise(self, model, belief, state, own_obs, signal, agent) -> float:
        if signal is EPSILON:
            return 0.0
        return pathwise_log_ratio(model, belief, state, own_obs, signal, 1, agent)

    def gain(self, model, beliefs, agent):
        return conditional_mutual_information_batch(model, beliefs, agent)


MUTUAL_INFORMATION = MutualInformationReward()


def check_reward_conditions(reward: ReceptionReward, model: MarkovModel, belief, agent: int, tol=1e-12) -> dict:
    """Evaluate conditions (A) and (B) at one belief; returns the two expectations and verdicts."""
    belief = as_belief(belief, model.num_states)
    joint = joint_distribution(model, belief, agent)
    shared = 0.0
    silent = 0.0
    for (x, y, z), p in np.ndenumerate(joint):
        if p <= 0:
            continue
        shared += p * reward.pointwise(model, belief, x, y, z, agent)
        silent += p * reward.pointwise(model, belief, x, y, EPSILON, agent)
    return {
        "shared_expectation": shared,
        "silent_expectation": silent,
        "A": shared >= -tol,
        "B": abs(silent) <= tol,
    }


def cgt_reward(
    model: MarkovModel,
    s: int,
    belief,
    opp_region: Region,
    agent: int,
    reward: ReceptionReward = MUTUAL_INFORMATION,
) -> float:
    """Expected reception gain when the opponent plays CGT on ``opp_region``."""
    belief = as_belief(belief, model.num_states)
    if s != 1 or not opp_region.contains(belief):
        return 0.0
    return float(reward.gain(model, belief, agent)[0])


def cgt_reward_batch(model, s, beliefs, opp_region, agent, reward=MUTUAL_INFORMATION) -> np.ndarray:
    beliefs = np.atleast_2d(beliefs)
    on = (np.asarray(s) == 1) & opp_region.contains_batch(beliefs)
    out = np.zeros(len(beliefs))
    if on.any():
        out[on] = reward.gain(model, beliefs[on], agent)
    return out


def stage_reward(
    model: MarkovModel,
    s: int,
    belief,
    opp_region: Region,
    agent: int,
    own_action: int,
    params: GameParams,
    reward: ReceptionReward = MUTUAL_INFORMATION,
) -> float:
    return cgt_reward(model, s, belief, opp_region, agent, reward) - own_action * params.cost_of(agent)


def expected_reception_gain(model: MarkovModel, belief, opp_share_prob: float, agent: int) -> float:
    """Gain when the opponent shares with a probability that ignores its private information."""
    if not 0.0 <= opp_share_prob <= 1.0:
        raise ValueError(f"share probability {opp_share_prob} outside [0, 1]")
    belief = as_belief(belief, model.num_states)
    return opp_share_prob * float(conditional_mutual_information_batch(model, belief, agent)[0])
