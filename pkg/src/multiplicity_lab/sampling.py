"""Deterministic low-discrepancy estimation of suprema over open balls."""

import math

import numpy as np
from scipy.stats import qmc


def ball_points(dim, radius, count, seed=0):
    """``count`` scrambled-Halton points strictly inside the open ball.

    Cube points are mapped to [-1, 1]^dim and kept if they fall inside the
    unit ball, so the sequence stays low-discrepancy.  Deterministic in
    ``seed``.
    """
    if count <= 0:
        return np.empty((0, dim))
    sampler = qmc.Halton(d=dim, scramble=True, seed=seed)
    out = []
    have = 0
    while have < count:
        batch = 2.0 * sampler.random(max(64, 4 * (count - have))) - 1.0
        inside = batch[np.einsum("ij,ij->i", batch, batch) < 1.0]
        out.append(inside)
        have += len(inside)
    pts = np.concatenate(out)[:count]
    return radius * pts


def _coordinate_ascent(fn, y, value, radius, iters, min_step):
    n = y.shape[0]
    step = radius / 4.0
    for _ in range(iters):
        if step < min_step:
            break
        improved = False
        for c in range(n):
            for sign in (1.0, -1.0):
                trial = y.copy()
                trial[c] += sign * step
                if trial @ trial >= radius * radius:
                    continue
                v = float(fn(trial[None, :])[0])
                if v > value:
                    y, value = trial, v
                    improved = True
                    break
        if not improved:
            step *= 0.5
    return y, value


def sup_over_ball(fn, dim, radius, *, per_unit=64, seed=0, refine_top=5,
                  iters=100, min_step=1e-10, budget_scale=1.0):
    """Lower estimate of sup_{|y| < radius} fn(y), with its maximiser.

    ``fn`` is vectorised over a (m, dim) batch.  The centre y = 0 is always
    evaluated, then ``per_unit * dim`` points per unit of radius (at least
    ``per_unit * dim``), then coordinate ascent from the best
    ``refine_top`` candidates with step halving down to ``min_step``.
    """
    count = int(math.ceil(budget_scale * per_unit * dim * max(radius, 1.0)))
    pts = np.vstack([np.zeros((1, dim)), ball_points(dim, radius, count, seed)])
    vals = np.asarray(fn(pts), dtype=float)
    order = np.lexsort((np.arange(len(vals)), -vals))
    best_y = pts[order[0]].copy()
    best_v = float(vals[order[0]])
    for i in order[:refine_top]:
        y, v = _coordinate_ascent(fn, pts[i].copy(), float(vals[i]), radius, iters, min_step)
        if v > best_v:
            best_y, best_v = y, v
    return best_v, best_y
