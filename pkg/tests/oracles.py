"""Independent reference computations used to check the package.

Written with plain loops and the entropy-difference form of conditional
mutual information, so they share no code path with the vectorized
implementations under test.
"""
import math

import numpy as np


def entropy_bits(probs):
    return -sum(p * math.log2(p) for p in probs if p > 0)


def cmi_bruteforce(transition_unused, own, opp, belief):
    """I(X; Z | Y) = H(X | Y) - H(X | Y, Z) by explicit enumeration."""
    d, ny, nz = len(belief), len(own[0]), len(opp[0])
    joint = {}
    for x in range(d):
        for y in range(ny):
            for z in range(nz):
                joint[x, y, z] = belief[x] * own[x][y] * opp[x][z]
    h_x_given_y = 0.0
    for y in range(ny):
        p_y = sum(joint[x, y, z] for x in range(d) for z in range(nz))
        if p_y <= 0:
            continue
        post = [sum(joint[x, y, z] for z in range(nz)) / p_y for x in range(d)]
        h_x_given_y += p_y * entropy_bits(post)
    h_x_given_yz = 0.0
    for y in range(ny):
        for z in range(nz):
            p_yz = sum(joint[x, y, z] for x in range(d))
            if p_yz <= 0:
                continue
            post = [joint[x, y, z] / p_yz for x in range(d)]
            h_x_given_yz += p_yz * entropy_bits(post)
    return h_x_given_y - h_x_given_yz


def filter_step(transition, own, opp, belief, y, z):
    """Scalar Bayes-then-predict step; z=None means no signal."""
    d = len(belief)
    post = [belief[x] * own[x][y] * (1.0 if z is None else opp[x][z]) for x in range(d)]
    total = sum(post)
    post = [p / total for p in post]
    return [sum(post[x] * transition[x][x2] for x in range(d)) for x2 in range(d)]


def vi_two_state(transition, own, opp, region_mask, cost, delta, resolution, sweeps=2000):
    """Scalar value iteration on the two-state grid with linear interpolation."""
    n = resolution + 1
    pts = [k / resolution for k in range(n)]
    gain = [cmi_bruteforce(None, own, opp, [q, 1 - q]) if region_mask[k] else 0.0 for k, q in enumerate(pts)]
    # successor table: list of (prob, lo index, weight lo, weight hi)
    succ = []
    for q in pts:
        rows = []
        for y in range(len(own[0])):
            for z in range(len(opp[0])):
                p = sum(b * own[x][y] * opp[x][z] for x, b in enumerate([q, 1 - q]))
                if p <= 0:
                    continue
                nxt = filter_step(transition, own, opp, [q, 1 - q], y, z)[0] * resolution
                lo = min(int(math.floor(nxt)), resolution - 1)
                w = nxt - lo
                rows.append((p, lo, 1 - w, w))
        succ.append(rows)
    v = [0.0] * n
    for _ in range(sweeps):
        new = []
        for k in range(n):
            if not region_mask[k]:
                new.append(0.0)
                continue
            cont = sum(p * (a * v[lo] + b * v[lo + 1]) for p, lo, a, b in succ[k])
            new.append(gain[k] + max(0.0, -cost + delta * cont))
        if max(abs(a - b) for a, b in zip(new, v)) < 1e-14:
            v = new
            break
        v = new
    return np.array(v)
