"""Forward simulation of the sharing game, Monte-Carlo values, deviation tests, and
the finite-horizon enumeration check.

Every rollout owns a counter-based random stream spawned from the seed, so a
rollout's path does not depend on how many others run alongside it.
"""
from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import EnumerationTooLarge
from .model import (
    EPSILON,
    MarkovModel,
    as_belief,
    belief_update,
    conditional_mutual_information,
    conditional_mutual_information_batch,
    other,
    sample_index,
)
from .reward import GameParams, stage_reward
from .solver import grid_gain
from .strategy import Region, cgt_action, cgt_actions_batch, flag_update

MAX_PROFILES = 10**6


def rollout_uniforms(seed: int, n_rollouts: int, horizon: int) -> Tuple[np.ndarray, np.ndarray]:
    """Per-rollout uniforms: (initial-state draw (n,), step draws (n, horizon, 3))."""
    children = np.random.SeedSequence(seed).spawn(n_rollouts)
    init = np.empty(n_rollouts)
    steps = np.empty((n_rollouts, horizon, 3))
    for i, ss in enumerate(children):
        gen = np.random.Generator(np.random.Philox(ss))
        init[i] = gen.random()
        steps[i] = gen.random((horizon, 3))
    return init, steps


def _sample_rows(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(probs, axis=1)
    idx = (cdf <= (u * cdf[:, -1])[:, None]).sum(axis=1)
    return np.minimum(idx, probs.shape[1] - 1)


@dataclass
class TrajectoryRecord:
    horizon: int
    seed: int
    profile: str
    states: List[int] = field(default_factory=list)
    obs: List[Tuple[int, int]] = field(default_factory=list)
    actions: List[Tuple[int, int]] = field(default_factory=list)
    signals: List[tuple] = field(default_factory=list)
    flags: List[int] = field(default_factory=list)
    beliefs: List[Tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    stage_rewards: List[Tuple[float, float]] = field(default_factory=list)

    def discounted_return(self, agent: int, delta: float) -> float:
        return float(sum(delta**t * r[agent - 1] for t, r in enumerate(self.stage_rewards)))

    def to_csv(self) -> str:
        d = len(self.beliefs[0][0]) if self.beliefs else 0
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(
            ["t", "state", "obs1", "obs2", "action1", "action2", "signal1", "signal2", "flag"]
            + [f"belief1_{i}" for i in range(d)]
            + [f"belief2_{i}" for i in range(d)]
            + ["reward1", "reward2"]
        )
        fmt_sig = lambda z: "eps" if z is EPSILON else z
        for t in range(len(self.states)):
            b1, b2 = self.beliefs[t]
            w.writerow(
                [t, self.states[t], *self.obs[t], *self.actions[t]]
                + [fmt_sig(z) for z in self.signals[t]]
                + [self.flags[t]]
                + [repr(float(v)) for v in b1]
                + [repr(float(v)) for v in b2]
                + [repr(float(r)) for r in self.stage_rewards[t]]
            )
        return buf.getvalue()


def _describe(profile: Sequence[Region]) -> str:
    return f"CGT({len(profile[0])}/{profile[0].grid.size}, {len(profile[1])}/{profile[1].grid.size})"


def simulate(
    model: MarkovModel,
    profile: Sequence[Region],
    params: GameParams,
    initial_belief,
    horizon: int,
    seed: int,
) -> TrajectoryRecord:
    """One trajectory with both agents on CGT strategies (``profile[n-1]`` is agent n's region).

    Uses the same random stream as rollout 0 of ``estimate_value``.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    prior = as_belief(initial_belief, model.num_states)
    init, steps = rollout_uniforms(seed, 1, horizon)
    rec = TrajectoryRecord(horizon, seed, _describe(profile))
    x = sample_index(prior, init[0])
    beliefs = [prior.copy(), prior.copy()]
    s = 1
    for t in range(horizon):
        u = steps[0, t]
        acts = tuple(cgt_action(s, beliefs[n], profile[n]) for n in (0, 1))
        rewards = tuple(
            stage_reward(model, s, beliefs[n - 1], profile[other(n) - 1], n, acts[n - 1], params) for n in (1, 2)
        )
        y = (sample_index(model.channel(1)[x], u[1]), sample_index(model.channel(2)[x], u[2]))
        signals = tuple(y[n] if acts[n] else EPSILON for n in (0, 1))
        rec.states.append(x)
        rec.obs.append(y)
        rec.actions.append(acts)
        rec.signals.append(signals)
        rec.flags.append(s)
        rec.beliefs.append((beliefs[0], beliefs[1]))
        rec.stage_rewards.append(rewards)
        beliefs = [
            belief_update(model, beliefs[n - 1], y[n - 1], signals[other(n) - 1], acts[other(n) - 1], n)
            for n in (1, 2)
        ]
        s = flag_update(s, *acts)
        x = sample_index(model.transition[x], u[0])
    return rec


def _batch_returns(
    model: MarkovModel,
    profile: Sequence[Region],
    params: GameParams,
    prior: np.ndarray,
    init: np.ndarray,
    steps: np.ndarray,
    s0: int = 1,
    forced: Optional[Tuple[int, int]] = None,
) -> np.ndarray:
    """Discounted returns (n, 2) of many rollouts at once.

    ``forced=(agent, action)`` overrides that agent's first action only.
    """
    n, horizon, _ = steps.shape
    x = _sample_rows(np.broadcast_to(prior, (n, prior.size)), init)
    b = [np.tile(prior, (n, 1)), np.tile(prior, (n, 1))]
    s = np.full(n, s0, dtype=int)
    returns = np.zeros((n, 2))
    c1, c2 = model.channels
    chans = (c1, c2)
    disc = 1.0
    for t in range(horizon):
        if not s.any() and (t > 0 or forced is None):
            break  # cgt play never shares again and the gain is zero from here on
        acts = [cgt_actions_batch(s, b[k], profile[k]) for k in (0, 1)]
        if t == 0 and forced is not None:
            acts[forced[0] - 1] = np.full(n, forced[1], dtype=int)
        for k in (0, 1):
            opp = 1 - k
            on = (s == 1) & profile[opp].contains_batch(b[k])
            gain = np.zeros(n)
            if on.any():
                gain[on] = conditional_mutual_information_batch(model, b[k][on], k + 1)
            returns[:, k] += disc * (gain - acts[k] * params.cost[k])
        y = [_sample_rows(chans[k][x], steps[:, t, k + 1]) for k in (0, 1)]
        new_b = []
        for k in (0, 1):
            opp = 1 - k
            lik = chans[k][:, y[k]].T
            lik = lik * np.where(acts[opp][:, None] == 1, chans[opp][:, y[opp]].T, 1.0)
            post = b[k] * lik
            post /= post.sum(axis=1, keepdims=True)
            new_b.append(post @ model.transition)
        b = new_b
        s = s * acts[0] * acts[1]
        x = _sample_rows(model.transition[x], steps[:, t, 0])
        disc *= params.delta
    return returns


def stage_reward_bound(model: MarkovModel, grid, params: GameParams, agent: int) -> float:
    gain = grid_gain(model, grid, agent)
    c = params.cost_of(agent)
    return float(max(np.max(gain), np.max(np.abs(gain - c))))


def truncation_bound(model, grid, params, agent, horizon) -> float:
    return params.delta**horizon * stage_reward_bound(model, grid, params, agent) / (1.0 - params.delta)


def estimate_value(
    model: MarkovModel,
    profile: Sequence[Region],
    params: GameParams,
    initial_belief,
    agent: int,
    n_rollouts: int,
    horizon: int,
    seed: int,
) -> Tuple[float, float, float]:
    """Monte-Carlo discounted value for ``agent``: (mean, standard error, truncation bound)."""
    if n_rollouts < 2:
        raise ValueError("need at least two rollouts")
    prior = as_belief(initial_belief, model.num_states)
    init, steps = rollout_uniforms(seed, n_rollouts, horizon)
    ret = _batch_returns(model, profile, params, prior, init, steps)[:, agent - 1]
    stderr = float(ret.std(ddof=1) / np.sqrt(n_rollouts))
    bound = truncation_bound(model, profile[0].grid, params, agent, horizon)
    return float(ret.mean()), stderr, bound


@dataclass
class DeviationReport:
    prescribed_action: int
    deviation_action: int
    gap: float
    stderr: float
    truncation_bound: float
    threshold: float
    violation: bool

    def to_json(self) -> dict:
        return dict(self.__dict__)


def deviation_test(
    model: MarkovModel,
    C: Region,
    params: GameParams,
    belief,
    agent: int,
    n_rollouts: int,
    horizon: int,
    seed: int,
    s: int = 1,
) -> DeviationReport:
    """Compare the prescribed CGT action with a one-shot deviation, both followed by (C, C).

    Both arms reuse the same random streams, so ``gap`` (deviation minus
    prescription) is a paired estimate.
    """
    prior = as_belief(belief, model.num_states)
    prescribed = cgt_action(s, prior, C)
    init, steps = rollout_uniforms(seed, n_rollouts, horizon)
    profile = (C, C)
    base = _batch_returns(model, profile, params, prior, init, steps, s0=s, forced=(agent, prescribed))
    dev = _batch_returns(model, profile, params, prior, init, steps, s0=s, forced=(agent, 1 - prescribed))
    diff = dev[:, agent - 1] - base[:, agent - 1]
    if np.all(diff == diff[0]):
        gap, stderr = float(diff[0]), 0.0  # exact: the mean of a constant must not pick up rounding
    else:
        gap = float(diff.mean())
        stderr = float(diff.std(ddof=1) / np.sqrt(n_rollouts))
    trunc = truncation_bound(model, C.grid, params, agent, horizon)
    threshold = 3 * stderr + trunc + 2 * params.vi_tolerance
    return DeviationReport(prescribed, 1 - prescribed, gap, stderr, trunc, threshold, gap > threshold)


# --- finite horizon -------------------------------------------------------

def _records(model: MarkovModel):
    """Possible one-step common-history records (a1, a2, z1, z2)."""
    out = []
    for a1, a2 in itertools.product((0, 1), repeat=2):
        z1s = range(model.num_obs(1)) if a1 else [EPSILON]
        z2s = range(model.num_obs(2)) if a2 else [EPSILON]
        for z1, z2 in itertools.product(z1s, z2s):
            out.append((a1, a2, z1, z2))
    return out


def _reduced_strategies(model, agent: int, depth: int, horizon: int, prefix: tuple, records) -> list:
    """Pure strategies on common histories, with own-unreachable histories pruned.

    Each strategy is a dict {history: action} over histories consistent with
    the agent's own prescribed actions.
    """
    out = []
    for a in (0, 1):
        if depth == horizon - 1:
            out.append({prefix: a})
            continue
        children = [prefix + (rec,) for rec in records if rec[agent - 1] == a]
        subs = [_reduced_strategies(model, agent, depth + 1, horizon, ch, records) for ch in children]
        for combo in itertools.product(*subs):
            strat = {prefix: a}
            for part in combo:
                strat.update(part)
            out.append(strat)
    return out


def _count_reduced(records_per_action: Tuple[int, int], depth: int, horizon: int) -> int:
    if depth == horizon - 1:
        return 2
    sub = _count_reduced(records_per_action, depth + 1, horizon)
    return sum(sub ** records_per_action[a] for a in (0, 1))


def _history_stats(model: MarkovModel, prior: np.ndarray, history: tuple):
    """P(signals in history | actions) and E[gain of agent n at this node; signals] for n = 1, 2."""
    t = len(history)
    d = model.num_states
    prob = 0.0
    gains = np.zeros(2)
    obs_ranges = [range(model.num_obs(1)), range(model.num_obs(2))]
    for xs in itertools.product(range(d), repeat=t):
        for ys in itertools.product(*(list(itertools.product(*obs_ranges)) for _ in range(t))):
            ok = True
            for (a1, a2, z1, z2), (y1, y2) in zip(history, ys):
                if (a1 and y1 != z1) or (a2 and y2 != z2):
                    ok = False
                    break
            if not ok:
                continue
            p = prior[xs[0]] if t else 1.0
            for k in range(t):
                p *= model.channel(1)[xs[k], ys[k][0]] * model.channel(2)[xs[k], ys[k][1]]
                if k + 1 < t:
                    p *= model.transition[xs[k], xs[k + 1]]
            if p <= 0:
                continue
            prob += p
            for n in (1, 2):
                b = prior
                for (a1, a2, z1, z2), (y1, y2) in zip(history, ys):
                    own_y = (y1, y2)[n - 1]
                    opp_a = (a1, a2)[other(n) - 1]
                    opp_z = (z1, z2)[other(n) - 1]
                    b = belief_update(model, b, own_y, opp_z, opp_a, n)
                gains[n - 1] += p * conditional_mutual_information(model, b, n)
    if t == 0:
        prob = 1.0
        gains = np.array([conditional_mutual_information(model, prior, n) for n in (1, 2)])
    return prob, gains


@dataclass
class FiniteHorizonVerdict:
    horizon: int
    restriction: str
    strategies_per_agent: Tuple[int, int]
    profiles: int
    nc_is_nash: bool
    nash_profiles: int
    sharing_nash_profiles: int
    no_sharing_equilibrium: bool
    max_own_sharing_effect: float
    one_shot_sharing_loss: Optional[Tuple[float, float]]

    @property
    def holds(self) -> bool:
        return self.nc_is_nash and self.no_sharing_equilibrium

    def to_json(self) -> dict:
        out = dict(self.__dict__)
        out["holds"] = self.holds
        return out


def finite_horizon_bruteforce(
    model: MarkovModel,
    params: GameParams,
    T: int,
    prior=None,
    max_profiles: int = MAX_PROFILES,
    tol: float = 1e-12,
) -> FiniteHorizonVerdict:
    """Exhaustive Nash check of the T-stage game over common-history pure strategies.

    Strategies are enumerated in reduced form (actions at histories ruled out
    by the agent's own earlier actions are dropped; they never affect payoffs).
    Payoffs are exact: the expected gain at a common history is the
    opponent's action times the conditional mutual information under the
    receiver's own belief, averaged over every state/observation path.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    prior = as_belief(prior if prior is not None else np.full(model.num_states, 1.0 / model.num_states))
    records = _records(model)
    per_action = [
        tuple(sum(1 for r in records if r[n - 1] == a) for a in (0, 1)) for n in (1, 2)
    ]
    counts = tuple(_count_reduced(per_action[n - 1], 0, T) for n in (1, 2))
    if counts[0] * counts[1] > max_profiles:
        raise EnumerationTooLarge(f"{counts[0]} x {counts[1]} reduced profiles exceeds {max_profiles}")

    strats = [_reduced_strategies(model, n, 0, T, (), records) for n in (1, 2)]
    histories = [()]
    frontier = [()]
    for _ in range(T - 1):
        frontier = [h + (r,) for h in frontier for r in records]
        histories.extend(frontier)
    stats = [_history_stats(model, prior, h) for h in histories]
    P = np.array([p for p, _ in stats])
    G = np.array([g for _, g in stats])  # (H, 2)

    def own_ok(strat, h, n):
        for k, rec in enumerate(h):
            if strat.get(h[:k]) != rec[n - 1]:
                return False
        return True

    A, B = [], []
    for n in (1, 2):
        a = np.zeros((len(strats[n - 1]), len(histories)))
        bmat = np.zeros_like(a)
        for i, st in enumerate(strats[n - 1]):
            for j, h in enumerate(histories):
                if own_ok(st, h, n):
                    a[i, j] = 1.0
                    bmat[i, j] = st[h]
        A.append(a)
        B.append(bmat)
    c1, c2 = params.cost
    J1 = A[0] @ np.diag(G[:, 0]) @ B[1].T - c1 * B[0] @ np.diag(P) @ A[1].T
    J2 = B[0] @ np.diag(G[:, 1]) @ A[1].T - c2 * A[0] @ np.diag(P) @ B[1].T

    best1 = J1.max(axis=0, keepdims=True)
    best2 = J2.max(axis=1, keepdims=True)
    nash = (J1 >= best1 - tol) & (J2 >= best2 - tol)
    # sharing on the path: any reachable history where either agent shares
    reach_pos = np.diag(P > 0).astype(float)
    shares = (B[0] @ reach_pos @ A[1].T + A[0] @ reach_pos @ B[1].T) > 0

    nc = [next(i for i, st in enumerate(strats[n - 1]) if not any(st.values())) for n in (1, 2)]
    nc_is_nash = bool(nash[nc[0], nc[1]])
    effect1 = J1 - J1[nc[0]][None, :]
    effect2 = J2 - J2[:, nc[1]][:, None]
    loss = None
    if T == 1:
        share = [next(i for i, st in enumerate(strats[n - 1]) if st[()] == 1) for n in (1, 2)]
        loss = (
            float(J1[share[0], nc[1]] - J1[nc[0], nc[1]]),
            float(J2[nc[0], share[1]] - J2[nc[0], nc[1]]),
        )
    return FiniteHorizonVerdict(
        horizon=T,
        restriction="pure strategies that depend on the common history only (reduced form)",
        strategies_per_agent=(len(strats[0]), len(strats[1])),
        profiles=len(strats[0]) * len(strats[1]),
        nc_is_nash=nc_is_nash,
        nash_profiles=int(nash.sum()),
        sharing_nash_profiles=int((nash & shares).sum()),
        no_sharing_equilibrium=not bool((nash & shares).any()),
        max_own_sharing_effect=float(max(effect1.max(), effect2.max())),
        one_shot_sharing_loss=loss,
    )
