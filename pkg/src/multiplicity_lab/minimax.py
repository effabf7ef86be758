"""Sup-inf / inf-sup machinery on finite grids.

Linear functionals on R^n are identified with vectors through the standard
inner product, so ``eta(v)`` is ``eta @ v`` throughout.  Objectives over a
set X are passed either as arrays of values on ``X.samples`` or as callables
evaluated on them.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import HypothesisError, NoWitnessFound
from .chebyshev import check_nonconvex, image_resolution
from .hilbert import (
    Perturbation,
    SetSpec,
    argmin_clusters,
    as_point,
    as_points,
    bisect_switch,
    default_eps_s,
    default_eps_v,
    oscillation,
)
from .sampling import sup_over_ball

log = logging.getLogger(__name__)


def pairing(eta, v):
    """eta(v) for a batch of functionals and/or vectors (last axis is R^n)."""
    return np.einsum("...i,...i->...", np.asarray(eta, dtype=float), np.asarray(v, dtype=float))


def _values(I, X):
    vals = I(X.samples) if callable(I) else I
    vals = np.asarray(vals, dtype=float).reshape(-1)
    if vals.shape[0] != len(X):
        raise ValueError(f"objective has {vals.shape[0]} values for {len(X)} samples")
    return vals


def _images(psi, X):
    return X.samples if psi is None else as_points(psi(X.samples))


def _scale(*arrays):
    return 1.0 + max(float(np.abs(a).max()) if np.size(a) else 0.0 for a in arrays)


@dataclass(frozen=True)
class GapEstimate:
    sup_inf: float
    inf_sup: float
    grids: str = ""

    @property
    def gap(self):
        return self.inf_sup - self.sup_inf

    def to_dict(self):
        return {"sup_inf": self.sup_inf, "inf_sup": self.inf_sup, "gap": self.gap, "grids": self.grids}


def tabulate(f, xs, ys):
    """f on the product of two 1-D grids, as an (len(xs), len(ys)) matrix."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    return np.broadcast_to(np.asarray(f(xs[:, None], ys[None, :]), dtype=float),
                           (len(xs), len(ys))).copy()


def minimax_gap(F, grids=""):
    """Exact discrete sup_y inf_x and inf_x sup_y of a value matrix F[x, y]."""
    F = np.asarray(F, dtype=float)
    if F.ndim != 2 or F.size == 0:
        raise ValueError("minimax_gap needs a non-empty (nx, ny) matrix")
    sup_inf = float(F.min(axis=0).max())
    inf_sup = float(F.max(axis=1).min())
    eps_num = 1e-10 * _scale(F)
    assert sup_inf <= inf_sup + eps_num, "weak duality violated"
    if not grids:
        grids = f"{F.shape[0]}x{F.shape[1]}"
    return GapEstimate(sup_inf, inf_sup, grids)


# --------------------------------------------------------------------------
# sup-inf upper bound for convex combinations
# --------------------------------------------------------------------------


@dataclass
class SupInfBoundReport:
    n_eta: int
    violations: int
    max_I: float
    tightest_slack: float
    worst_eta: np.ndarray

    @property
    def ok(self):
        return self.violations == 0


def check_sup_inf_bound(I, psi, xs, weights, eta_samples, X, eps_num=None):
    """Check inf_x I(x) + eta(psi(x) - sum_i w_i psi(x_i)) <= max_i I(x_i)
    for every sampled functional eta.

    ``slack`` is the right side minus the left side, so the inequality is
    violated only when the slack drops below -eps_num.
    """
    weights = np.asarray(weights, dtype=float)
    xs = np.asarray(xs, dtype=int)
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
        raise ValueError(f"weights must be non-negative and sum to 1 (sum = {weights.sum()!r})")
    if len(weights) != len(xs):
        raise ValueError("one weight per point")
    vals = _values(I, X)
    images = _images(psi, X)
    etas = as_points(eta_samples, images.shape[1])
    bary = weights @ images[xs]
    inner = (vals[None, :] + etas @ (images - bary).T).min(axis=1)
    bound = float(vals[xs].max())
    if eps_num is None:
        eps_num = 1e-10 * _scale(vals, images, etas)
    slack = bound - inner
    worst = int(np.argmin(slack))
    return SupInfBoundReport(len(etas), int(np.sum(slack < -eps_num)), bound, float(slack[worst]), etas[worst])


# --------------------------------------------------------------------------
# the ball margin condition
# --------------------------------------------------------------------------


def linear_sup_over_ball(v, r):
    """sup over the open ball |eta| < r of eta(v); attained only in the closure."""
    if r <= 0:
        raise ValueError("r must be positive")
    return float(np.linalg.norm(np.asarray(v, dtype=float)) * r)


@dataclass
class BallConditionReport:
    inf_sup_term: float
    sup_inf_term: float
    osc_phi: float
    eta_star: np.ndarray

    @property
    def margin(self):
        return self.inf_sup_term - self.sup_inf_term - self.osc_phi

    def to_dict(self):
        return {
            "inf_sup_term": self.inf_sup_term,
            "sup_inf_term": self.sup_inf_term,
            "osc_phi": self.osc_phi,
            "margin": self.margin,
        }


def sup_inf_over_ball(vals, images, u0, r, budget=1.0, seed=0):
    """Estimate sup_{|eta|<r} inf_x vals(x) + eta(psi(x) - u0).

    The inner infimum is concave in eta, so sampling plus coordinate ascent
    gives a reliable lower estimate.
    """
    shifted = images - u0[None, :]

    def fn(E):
        return (vals[None, :] + E @ shifted.T).min(axis=1)

    return sup_over_ball(fn, images.shape[1], r, seed=seed, budget_scale=budget)


def ball_condition_margin(I, psi, phi, u0, r, X, budget=1.0, seed=0):
    """[inf_x I + |psi - u0| r] - [sup_{|eta|<r} inf_x I + eta(psi - u0)] - osc(phi).

    The first bracket uses the closed form of the linear supremum over the
    ball; the second is estimated from below by ball sampling, which makes
    the returned margin an upper estimate.  Positive means the condition
    holds on the discretisation.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    vals = _values(I, X)
    images = _images(psi, X)
    u0 = as_point(u0, images.shape[1])
    first = float((vals + np.linalg.norm(images - u0, axis=1) * r).min())
    second, eta = sup_inf_over_ball(vals, images, u0, r, budget, seed)
    return BallConditionReport(first, float(second), oscillation(phi), eta)


def nearest_point_instance(u0, psi, X, phi):
    """The (I, phi) pair under which the radius condition for nearest points
    becomes the ball margin condition: I = |psi - u0|^2 / 2 and half the perturbation."""
    images = _images(psi, X)
    u0 = as_point(u0, images.shape[1])
    vals = 0.5 * np.einsum("ij,ij->i", images - u0, images - u0)
    return vals, Perturbation(0.5 * np.asarray(phi.values))


@dataclass
class BridgeReport:
    sup_inf: float
    inf_sup: float

    @property
    def strict(self):
        return self.sup_inf < self.inf_sup


def minimax_bridge(I, psi, phi, u0, r, X, budget=1.0, seed=0):
    """Both sides of sup_{B_r} inf_X f versus inf_X sup_{B_r} f for
    f(x, eta) = I(x) + eta(psi(x) - u0) + phi(x)."""
    vals = _values(I, X) + np.asarray(phi.values, dtype=float)
    images = _images(psi, X)
    u0 = as_point(u0, images.shape[1])
    inf_sup = float((vals + np.linalg.norm(images - u0, axis=1) * r).min())
    sup_inf, _ = sup_inf_over_ball(vals, images, u0, r, budget, seed)
    return BridgeReport(float(sup_inf), inf_sup)


# --------------------------------------------------------------------------
# hypotheses of the minimax equality
# --------------------------------------------------------------------------


@dataclass
class MinimaxHypotheses:
    unique_minimum: bool
    quasi_concave: bool
    worst_quasi_concavity: float
    n_multi_min: int
    checks: dict = field(default_factory=dict)

    @property
    def ok(self):
        return self.unique_minimum and self.quasi_concave


def check_minimax_hypotheses(f, xs, ys, n_triples=1000, seed=0, eps_num=None):
    """Sample-based validation: for every grid y the minimum over the x-grid
    is a single cluster, and f(x, .) passes random three-point
    quasi-concavity tests f(x, t y1 + (1-t) y2) >= min(f(x, y1), f(x, y2))."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    F = np.asarray(f(xs[:, None], ys[None, :]), dtype=float)
    if eps_num is None:
        eps_num = 1e-10 * _scale(F)
    xpts = xs[:, None]
    # neighbouring grid nodes tying at an off-grid minimiser are one minimum
    eps_s = 1.5 * float(np.max(np.diff(np.sort(xs)))) if len(xs) > 1 else 1.0
    multi = 0
    for j in range(F.shape[1]):
        if len(argmin_clusters(F[:, j], xpts, eps_s=eps_s)) > 1:
            multi += 1
    rng = np.random.default_rng(seed)
    xi = rng.integers(0, len(xs), n_triples)
    y1 = rng.choice(ys, n_triples)
    y2 = rng.choice(ys, n_triples)
    t = rng.random(n_triples)
    x = xs[xi]
    lhs = f(x, t * y1 + (1 - t) * y2)
    rhs = np.minimum(f(x, y1), f(x, y2))
    worst = float(np.min(lhs - rhs))
    return MinimaxHypotheses(multi == 0, worst >= -eps_num, worst, multi,
                             {"n_triples": n_triples, "eps_num": eps_num})


# --------------------------------------------------------------------------
# two global minima of I + eta o psi
# --------------------------------------------------------------------------


@dataclass
class EtaWitness:
    eta: np.ndarray
    clusters: list
    objective_min: float

    def to_dict(self):
        return {
            "eta": [float(c) for c in self.eta],
            "clusters": [
                {"representative": [float(c) for c in cl.representative], "value": cl.value}
                for cl in self.clusters
            ],
            "objective_min": self.objective_min,
        }


def eta_lattice(dim, bound, spacing):
    m = int(math.floor(bound / spacing + 1e-9))
    axis = spacing * np.arange(-m, m + 1)
    grids = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def find_eta_two_minima(I, psi, X, lattice=None, *, bound=2.0, spacing=0.25, eps_v=None,
                        eps_s=None, top=8, check_convexity=True, seed=0):
    """Lattice search for eta making x -> I(x) + eta(psi(x)) attain its
    global minimum in two or more separated clusters.

    Candidates are ranked by cluster count, then by the gap between the
    global minimum and the best value away from the argmin, then by |eta|.
    Raises :class:`NoWitnessFound` when neither the lattice nor the
    bisection between its two best candidates yields a witness.
    """
    vals = _values(I, X)
    images = _images(psi, X)
    dim = images.shape[1]
    if check_convexity:
        nc = check_nonconvex(images, image_resolution(psi, X, images), seed=seed)
        if not nc.nonconvex:
            raise HypothesisError("nonconvex", "psi(X) looks convex at sampling resolution")
    if eps_s is None:
        eps_s = default_eps_s(X)
    domain = X.samples
    etas = eta_lattice(dim, bound, spacing) if lattice is None else as_points(lattice, dim)
    table = vals[None, :] + etas @ images.T
    amin = np.argmin(table, axis=1)
    vmin = table[np.arange(len(etas)), amin]
    far = np.linalg.norm(domain[None, :, :] - domain[amin][:, None, :], axis=2) > eps_s
    vsec = np.where(far, table, np.inf).min(axis=1)
    defect = vsec - vmin
    norms = np.linalg.norm(etas, axis=1)
    order = np.lexsort((np.arange(len(etas)), norms, defect))

    def clusters_at(eta):
        row = vals + images @ eta
        ev = default_eps_v(float(row.min())) if eps_v is None else eps_v
        return argmin_clusters(row, domain, ev, eps_s), row

    scored = []
    for i in order[:top]:
        cl, row = clusters_at(etas[i])
        scored.append((-len(cl), float(defect[i]), float(norms[i]), int(i), cl, row))
    scored.sort(key=lambda s: s[:4])
    neg, _, _, i_best, cl, row = scored[0]
    if -neg >= 2:
        return EtaWitness(etas[i_best].copy(), cl, float(row.min()))

    def argmin_at(eta):
        return int(np.argmin(vals + images @ eta))

    def separated(i, j):
        return float(np.linalg.norm(domain[i] - domain[j])) > eps_s

    a1 = int(amin[i_best])
    other = [i for i in order if separated(a1, int(amin[i]))]
    if other:
        lo, hi = bisect_switch(argmin_at, separated, etas[i_best], etas[other[0]])
        for eta in (0.5 * (lo + hi), lo, hi):
            cl, row = clusters_at(eta)
            if len(cl) >= 2:
                return EtaWitness(np.asarray(eta, dtype=float), cl, float(row.min()))
    raise NoWitnessFound("no lattice functional produced two separated global minima",
                         best=etas[i_best].copy())


def random_sup_inf_instance(rng, n_max=3, k=12, max_points=5):
    """A random (values, images, xs, weights) instance for the property suite."""
    n = int(rng.integers(1, n_max + 1))
    images = rng.normal(size=(k, n))
    vals = rng.normal(size=k)
    m = int(rng.integers(1, max_points + 1))
    xs = rng.choice(k, size=m, replace=False)
    w = rng.dirichlet(np.ones(m))
    w[-1] = 1.0 - w[:-1].sum()
    if w[-1] < 0:
        w = np.full(m, 1.0 / m)
    X = SetSpec("point-cloud", rng.normal(size=(k, 1)))
    return X, vals, images, xs, w, n

