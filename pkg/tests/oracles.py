"""Reference evaluations written independently of the package code paths."""

import math

import numpy as np


def dh_matrix(theta, alpha, a, d):
    """Generic distal-convention link transform."""
    ct, st = math.cos(theta), math.sin(theta)
    ca, sa = math.cos(alpha), math.sin(alpha)
    return np.array(
        [
            [ct, -st * ca, st * sa, a * ct],
            [st, ct * ca, -ct * sa, a * st],
            [0.0, sa, ca, d],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


def dh_table(p):
    """(alpha, a, d) per link, reading the twists and lengths off the printed link matrices."""
    half_pi = math.pi / 2
    return [(0.0, 0.0, 0.0), (0.0, p.d2, 0.0), (half_pi, p.d3, 0.0), (half_pi, 0.0, p.d4)]


def chain_fk(thetas, p):
    m = np.eye(4)
    for theta, (alpha, a, d) in zip(thetas, dh_table(p)):
        m = m @ dh_matrix(theta, alpha, a, d)
    return m


def platform_translation(a, b, p):
    """Platform origin straight from the closed-form x/y/z expressions."""
    xc = p.e3 / 2 + a + (b + p.e3 - p.e2) / 2
    zc = math.sqrt(p.d1**2 - ((b + p.e3 - p.e2) / 2) ** 2) + p.h + p.e1
    return np.array([xc, p.e4, zc])


def arm_fk(state, p):
    a, b, *thetas = state
    base = np.eye(4)
    base[:3, 3] = platform_translation(a, b, p)
    return base @ chain_fk(thetas, p)


def random_valid_states(p, n, rng, grid_a=False):
    """Uniform joint states inside all limits, rejecting rail overruns."""
    out = []
    while len(out) < n:
        a = rng.uniform(p.a_min, p.a_max)
        if grid_a:
            a = float(round(a))
        b = rng.uniform(p.b_min, p.b_max)
        if a + b + p.carriage > p.rail_length:
            continue
        thetas = [rng.uniform(lo, hi) for lo, hi in p.theta_limits]
        out.append((a, b, *thetas))
    return out
