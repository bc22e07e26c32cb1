"""Hidden Markov chain, per-agent observation channels, and exact belief filtering.

Agents are numbered 1 and 2. A signal received from the other agent is either
an observation index (the other agent shared) or ``EPSILON`` (it did not).
Beliefs are plain 1-D numpy arrays over the hidden states.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidBelief,
    NegativeEntry,
    NonStochasticRow,
    SignalActionMismatch,
    ZeroLikelihood,
)

ROW_TOL = 1e-9
LOG_FLOOR = 1e-15

EPSILON = None
Signal = Optional[int]


def other(agent: int) -> int:
    return 3 - agent


def _check_agent(agent: int) -> None:
    if agent not in (1, 2):
        raise ValueError(f"agent must be 1 or 2, got {agent!r}")


def _check_stochastic(name: str, mat: np.ndarray) -> None:
    for i, row in enumerate(mat):
        neg = np.flatnonzero(row < 0)
        if neg.size:
            raise NegativeEntry(
                f"{name} has negative entry at row {i}, column {neg[0]}: {row[neg[0]]!r}",
                where=(name, i, int(neg[0])),
            )
        if abs(row.sum() - 1.0) > ROW_TOL:
            raise NonStochasticRow(
                f"{name} row {i} sums to {row.sum()!r}, not 1", where=(name, i)
            )


@dataclass(frozen=True, eq=False)
class MarkovModel:
    """Transition kernel ``transition[x, x']`` and emission channels ``channels[n-1][x, y]``.

    Construction validates every invariant, so any instance is usable as-is.
    """

    transition: np.ndarray
    channels: tuple

    def __post_init__(self):
        transition = np.array(self.transition, dtype=float)
        channels = tuple(np.array(c, dtype=float) for c in self.channels)
        for arr in (transition, *channels):
            arr.setflags(write=False)
        object.__setattr__(self, "transition", transition)
        object.__setattr__(self, "channels", channels)
        validate_model(self)

    @property
    def num_states(self) -> int:
        return self.transition.shape[0]

    def channel(self, agent: int) -> np.ndarray:
        _check_agent(agent)
        return self.channels[agent - 1]

    def num_obs(self, agent: int) -> int:
        return self.channel(agent).shape[1]

    def _key(self):
        return (self.transition.tobytes(), self.transition.shape) + tuple(
            (c.tobytes(), c.shape) for c in self.channels
        )

    def __eq__(self, other):
        if not isinstance(other, MarkovModel):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    @classmethod
    def bsc(cls, transition, p1: float, p2: float) -> "MarkovModel":
        """Two-state chain observed by two binary symmetric channels (p on the diagonal)."""
        return cls(transition, (bsc_channel(p1), bsc_channel(p2)))


def bsc_channel(p: float) -> np.ndarray:
    return np.array([[p, 1.0 - p], [1.0 - p, p]])


REFERENCE_TRANSITION = ((0.8, 0.2), (0.15, 0.85))


def reference_model(p1: float = 0.6, p2: float = 0.6) -> MarkovModel:
    """Reference two-state chain with binary symmetric observation channels."""
    return MarkovModel.bsc(REFERENCE_TRANSITION, p1, p2)


def validate_model(model: MarkovModel) -> None:
    """Raise a ``ModelError`` naming the first violated row or entry; return None if valid."""
    t = model.transition
    if t.ndim != 2 or t.shape[0] != t.shape[1]:
        raise DimensionMismatch(f"transition must be square, got shape {t.shape}")
    if t.shape[0] < 2:
        raise DimensionMismatch("need at least two hidden states")
    if len(model.channels) != 2:
        raise DimensionMismatch(f"expected two channels, got {len(model.channels)}")
    _check_stochastic("transition", t)
    for n, c in enumerate(model.channels, start=1):
        if c.ndim != 2 or c.shape[0] != t.shape[0] or c.shape[1] < 1:
            raise DimensionMismatch(
                f"channel {n} has shape {c.shape}, expected ({t.shape[0]}, >=1)"
            )
        _check_stochastic(f"channel {n}", c)


def as_belief(probs, num_states: Optional[int] = None) -> np.ndarray:
    b = np.asarray(probs, dtype=float)
    if b.ndim != 1:
        raise InvalidBelief(f"belief must be a vector, got shape {b.shape}")
    if num_states is not None and b.size != num_states:
        raise DimensionMismatch(f"belief has {b.size} entries, model has {num_states} states")
    if np.any(b < 0):
        raise InvalidBelief(f"belief has negative entries: {b}")
    if abs(b.sum() - 1.0) > ROW_TOL:
        raise InvalidBelief(f"belief sums to {b.sum()!r}")
    return b


def uniform_belief(num_states: int) -> np.ndarray:
    return np.full(num_states, 1.0 / num_states)


def signal_likelihood(model: MarkovModel, state: int, signal: Signal, opp_action: int, agent: int) -> float:
    """P(z | x, a) for the signal agent ``agent`` receives from the other agent."""
    if signal is EPSILON:
        return 1.0 if opp_action == 0 else 0.0
    if opp_action != 1:
        return 0.0
    return float(model.channel(other(agent))[state, signal])


def _likelihood(model: MarkovModel, agent: int, own_obs: int, signal: Signal, opp_action: int) -> np.ndarray:
    if (signal is EPSILON) != (opp_action == 0):
        raise SignalActionMismatch(f"signal {signal!r} with opponent action {opp_action}")
    lik = model.channel(agent)[:, own_obs]
    if signal is not EPSILON:
        lik = lik * model.channel(other(agent))[:, signal]
    return lik


def belief_update(
    model: MarkovModel,
    belief,
    own_obs: int,
    signal: Signal,
    opp_action: int,
    agent: int,
) -> np.ndarray:
    """One filtering step: condition on this step's data, then predict through the kernel.

    ``belief`` is the distribution of the current state given everything seen
    before this step; the result is the distribution of the next state.
    """
    belief = as_belief(belief, model.num_states)
    joint = belief * _likelihood(model, agent, own_obs, signal, opp_action)
    norm = joint.sum()
    if norm <= 0.0:
        raise ZeroLikelihood(
            f"observation {own_obs} with signal {signal!r} is impossible under belief {belief}"
        )
    return (joint / norm) @ model.transition


def cooperative_update(model: MarkovModel, belief: np.ndarray, y1: int, y2: int) -> np.ndarray:
    """Common belief update when both agents shared (agent-symmetric)."""
    return belief_update(model, belief, y1, y2, 1, agent=1)


def joint_observation_probs(model: MarkovModel, beliefs: np.ndarray) -> np.ndarray:
    """P(y1, y2 | belief) for a batch of beliefs, shape (..., |Y1|, |Y2|)."""
    c1, c2 = model.channels
    return np.einsum("...x,xa,xb->...ab", beliefs, c1, c2)


def conditional_mutual_information_batch(model: MarkovModel, beliefs, agent: int) -> np.ndarray:
    """I(X; Y^{-n} | Y^n) in bits for each row of ``beliefs``."""
    beliefs = np.atleast_2d(np.asarray(beliefs, dtype=float))
    own = model.channel(agent)
    opp = model.channel(other(agent))
    joint = beliefs[:, :, None, None] * own[None, :, :, None] * opp[None, :, None, :]
    p_y = joint.sum(axis=(1, 3))
    p_xy = joint.sum(axis=3)
    p_yy = joint.sum(axis=1)
    # I = sum p(x,y,y') log[ p(x,y,y') p(y) / (p(x,y) p(y,y')) ]
    num = joint * p_y[:, None, :, None]
    den = p_xy[:, :, :, None] * p_yy[:, None, :, :]
    mask = joint > LOG_FLOOR  # 0 log 0 := 0
    terms = np.zeros_like(joint)
    terms[mask] = joint[mask] * np.log2(num[mask] / den[mask])
    return np.maximum(terms.sum(axis=(1, 2, 3)), 0.0)


def conditional_mutual_information(model: MarkovModel, belief, agent: int) -> float:
    belief = as_belief(belief, model.num_states)
    return float(conditional_mutual_information_batch(model, belief, agent)[0])


def conditional_entropy(joint: np.ndarray, target_axis: int = 0) -> float:
    """H(target | rest) in bits for a joint probability array."""
    p_rest = joint.sum(axis=target_axis, keepdims=True)
    mask = joint > LOG_FLOOR
    ratio = np.ones_like(joint)
    ratio[mask] = (joint / np.broadcast_to(p_rest, joint.shape))[mask]
    return float(-(joint[mask] * np.log2(ratio[mask])).sum())


def joint_distribution(model: MarkovModel, belief, agent: int) -> np.ndarray:
    """P(x, y^n, y^{-n}) with axes ordered (state, own obs, other's obs)."""
    belief = as_belief(belief, model.num_states)
    own = model.channel(agent)
    opp = model.channel(other(agent))
    return belief[:, None, None] * own[:, :, None] * opp[:, None, :]


def pathwise_log_ratio(
    model: MarkovModel, belief, state: int, own_obs: int, signal: Signal, opp_action: int, agent: int
) -> float:
    """log2 P(x | z, y, belief) / P(x | y, belief) for one realization.

    Averaging this over (x, y, z) drawn from the model recovers the expected
    reception gain; it is a diagnostic for the belief-level reward.
    """
    belief = as_belief(belief, model.num_states)
    own = model.channel(agent)[:, own_obs]
    post_own = belief * own
    if post_own[state] <= 0:
        raise ZeroLikelihood(f"state {state} impossible given own observation {own_obs}")
    post_own = post_own / post_own.sum()
    post_both = belief * _likelihood(model, agent, own_obs, signal, opp_action)
    post_both = post_both / post_both.sum()
    return float(np.log2(post_both[state] / post_own[state]))


def sample_index(probs: Sequence[float], u: float) -> int:
    """Inverse-CDF draw from a discrete distribution given a uniform ``u``."""
    cdf = np.cumsum(probs)
    idx = int(np.searchsorted(cdf, u * cdf[-1], side="right"))
    return min(idx, len(cdf) - 1)
