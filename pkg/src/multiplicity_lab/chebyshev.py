"""Radius certificates and double-minimum witnesses for perturbed
nearest-point problems on non-convex sample sets.

For a set X, a centre u0 off X and a bounded perturbation phi, a radius r is
admissible when

    r > (rho_r - delta**2 + osc(phi)) / (2 * delta),

with delta = dist(u0, X) and rho_r = sup_{|y|<r} dist(u0 + y, X)**2 - |y|**2.
Inside the ball of any admissible radius there is a point y0 at which
x -> |psi(x) - y0|**2 + phi(x) has at least two global minima; this module
searches for it on a lattice and checks the result by brute force.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DomainError, EmptySetError, HypothesisError, NoWitnessFound
from .hilbert import (
    ArgminCluster,
    Perturbation,
    argmin_clusters,
    as_point,
    as_points,
    bisect_switch,
    default_eps_s,
    default_eps_v,
    dist_to_set,
    oscillation,
)
from .sampling import sup_over_ball

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RadiusCertificate:
    r: float
    delta: float
    rho_r: float
    osc_phi: float
    margin: float

    @property
    def admissible(self):
        return self.margin > 0

    @property
    def threshold(self):
        return (self.rho_r - self.delta ** 2 + self.osc_phi) / (2 * self.delta)

    def to_dict(self):
        return {
            "r": self.r,
            "delta": self.delta,
            "rho_r": self.rho_r,
            "osc_phi": self.osc_phi,
            "margin": self.margin,
            "admissible": self.admissible,
        }


def certificate_margin(r, delta, rho_r, osc_phi):
    return float(r - (rho_r - delta ** 2 + osc_phi) / (2 * delta))


@dataclass
class DoubleMinWitness:
    y0: np.ndarray
    clusters: list
    objective_min: float
    ball_radius_used: float
    margin: float = float("nan")
    defect: float = 0.0

    def to_dict(self):
        return {
            "y0": [float(c) for c in self.y0],
            "radius": self.ball_radius_used,
            "clusters": [
                {"representative": [float(c) for c in cl.representative], "value": cl.value}
                for cl in self.clusters
            ],
            "margin": self.margin,
        }


@dataclass
class VerificationReport:
    y0: np.ndarray
    clusters: list
    objective_min: float
    eps_v: float
    eps_s: float

    @property
    def n_clusters(self):
        return len(self.clusters)

    @property
    def values(self):
        return [cl.value for cl in self.clusters]

    @property
    def ok(self):
        return self.n_clusters >= 2


def _images(psi, X_domain):
    if psi is None:
        return X_domain.samples
    return as_points(psi(X_domain.samples))


def _check_delta(u0, X, tol=1e-12):
    delta = dist_to_set(u0, X)
    scale = 1.0 + float(np.abs(X.samples).max())
    if delta <= tol * scale:
        raise DomainError(f"u0 lies on the set (dist = {delta:.3e}); the radius bound is undefined")
    return delta


def rho_r(u0, X, r, budget=1.0, seed=0):
    """Lower estimate of sup_{|y|<r} dist(u0 + y, X)**2 - |y|**2.

    Never below the y = 0 value delta**2; the triangle-inequality envelope
    delta**2 + 2 delta r is asserted on every call.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    u0 = as_point(u0, X.dim)
    delta = _check_delta(u0, X)

    def fn(Y):
        d2, _ = kernels.min_sqdist(u0[None, :] + Y, X.samples)
        return d2 - np.einsum("ij,ij->i", Y, Y)

    value, _ = sup_over_ball(fn, X.dim, r, seed=seed, budget_scale=budget)
    value = max(value, delta ** 2)
    slack = 1e-12 * (1.0 + delta ** 2 + 2 * delta * r)
    assert delta ** 2 <= value <= delta ** 2 + 2 * delta * r + slack, "rho_r escaped its envelope"
    return float(value)


def geometric_grid(r_min, r_max, num):
    return np.geomspace(r_min, r_max, num)


def admissible_r_scan(u0, X, phi, r_grid, budget=1.0, seed=0):
    r_grid = list(np.atleast_1d(np.asarray(r_grid, dtype=float)))
    if not r_grid:
        raise EmptySetError("empty radius grid")
    u0 = as_point(u0, X.dim)
    delta = _check_delta(u0, X)
    osc = oscillation(phi)
    certs = []
    for r in r_grid:
        rho = rho_r(u0, X, r, budget=budget, seed=seed)
        certs.append(RadiusCertificate(float(r), delta, rho, osc, certificate_margin(r, delta, rho, osc)))
    return certs


# --------------------------------------------------------------------------
# non-convexity of the image
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class NonconvexityCertificate:
    nonconvex: bool
    midpoint: np.ndarray | None
    distance: float
    threshold: float


def check_nonconvex(images, resolution=0.0, n_pairs=10_000, seed=0):
    """Random midpoint test: the image is certified non-convex when some
    midpoint of two image points sits farther than 3 * resolution from it."""
    images = as_points(images)
    k = len(images)
    scale = 1.0 + float(np.abs(images).max())
    threshold = max(3.0 * resolution, 1e-9 * scale)
    if k < 2:
        return NonconvexityCertificate(False, None, 0.0, threshold)
    rng = np.random.default_rng(seed)
    i = rng.integers(0, k, n_pairs)
    j = rng.integers(0, k, n_pairs)
    mids = 0.5 * (images[i] + images[j])
    d2, _ = kernels.min_sqdist(mids, images)
    best = int(np.argmax(d2))
    dist = float(np.sqrt(d2[best]))
    return NonconvexityCertificate(dist > threshold, mids[best], dist, threshold)


def image_resolution(psi, X_domain, images):
    if X_domain.kind != "parametric-curve":
        return 0.0
    if psi is None:
        return X_domain.resolution
    gaps = np.linalg.norm(np.diff(images, axis=0), axis=1)
    return float(gaps.max()) if gaps.size else 0.0


# --------------------------------------------------------------------------
# witness search
# --------------------------------------------------------------------------


def ball_lattice(center, radius, spacing):
    """Lattice points center + spacing * k with |spacing * k| <= radius - spacing."""
    center = np.asarray(center, dtype=float)
    n = center.shape[0]
    reach = radius - spacing
    if reach < 0:
        return center[None, :].copy()
    m = int(math.floor(reach / spacing + 1e-9))
    axis = np.arange(-m, m + 1)
    grids = np.meshgrid(*([axis] * n), indexing="ij")
    ks = np.stack([g.ravel() for g in grids], axis=1)
    offsets = spacing * ks
    keep = np.einsum("ij,ij->i", offsets, offsets) <= reach * reach * (1 + 1e-12)
    return center[None, :] + offsets[keep]


def default_spacing(radius, dim, budget=1.0):
    per_axis = {1: 50, 2: 30, 3: 12}.get(dim, 6)
    per_axis = max(2, int(round(per_axis * budget ** (1.0 / dim))))
    return radius / per_axis


def _objective(images, phi_values, y):
    diff = images - y[None, :]
    return np.einsum("ij,ij->i", diff, diff) + phi_values


def find_double_minimum(u0, psi, X_domain, phi, cert, lattice=None, *, eps_v=None,
                        eps_s=None, spacing=None, refinements=2, top=8, budget=1.0,
                        check_convexity=True, seed=0):
    """Search the open ball B(u0, cert.r) for y0 where
    x -> |psi(x) - y0|**2 + phi(x) has two or more separated global minima.

    ``psi`` maps (k, d) domain samples to (k, n) images; ``None`` means the
    identity.  The lattice (default: spacing r/L centred at u0) is screened
    with the nearest-sample kernel, the top candidates are clustered
    exactly, and if none already has two clusters the argmin jump between
    the two best candidates is located by bisection.  Raises
    :class:`NoWitnessFound` when every refinement level comes up empty.
    """
    if not cert.admissible:
        raise HypothesisError("admissible", f"certificate margin {cert.margin:.3e} is not positive")
    images = _images(psi, X_domain)
    u0 = as_point(u0, images.shape[1])
    phi_values = np.asarray(phi.values if isinstance(phi, Perturbation) else phi, dtype=float)
    domain = X_domain.samples
    if check_convexity:
        nc = check_nonconvex(images, image_resolution(psi, X_domain, images), seed=seed)
        if not nc.nonconvex:
            raise HypothesisError("nonconvex", "image of the domain looks convex at sampling resolution")
    if eps_s is None:
        eps_s = default_eps_s(X_domain)
    r = cert.r
    if spacing is None:
        spacing = default_spacing(r, u0.shape[0], budget)

    def argmin_at(y):
        return int(np.argmin(_objective(images, phi_values, y)))

    def separated(i, j):
        return float(np.linalg.norm(domain[i] - domain[j])) > eps_s

    def inside(y):
        return float(np.linalg.norm(y - u0)) < r

    center = u0
    best_seen = None
    for level in range(refinements + 1):
        if lattice is not None and level == 0:
            pts = as_points(lattice, u0.shape[0])
            pts = pts[np.linalg.norm(pts - u0, axis=1) < r]
        else:
            pts = ball_lattice(center, r if level == 0 else 4 * spacing, spacing)
            pts = pts[np.linalg.norm(pts - u0, axis=1) <= r - spacing + 1e-15]
        if len(pts) == 0:
            break
        vmin, amin, vsec = kernels.lattice_screen(pts, images, phi_values, domain, float(eps_s))
        defect = vsec - vmin
        dist0 = np.linalg.norm(pts - u0, axis=1)
        order = np.lexsort((np.arange(len(pts)), dist0, defect))
        scored = []
        for i in order[:top]:
            vals = _objective(images, phi_values, pts[i])
            ev = default_eps_v(float(vals.min())) if eps_v is None else eps_v
            clusters = argmin_clusters(vals, domain, ev, eps_s)
            scored.append((-len(clusters), float(defect[i]), float(dist0[i]), int(i), clusters, vals))
        scored.sort(key=lambda s: s[:4])
        neg_count, dfct, _, i_best, clusters, vals = scored[0]
        if best_seen is None or (neg_count, dfct) < (best_seen[0], best_seen[1]):
            best_seen = (neg_count, dfct, pts[i_best].copy())
        if -neg_count >= 2:
            return _witness(pts[i_best], clusters, vals, r, cert, float(dfct))

        # bisect towards the argmin jump between the two best candidates
        y1 = pts[i_best]
        a1 = int(amin[i_best])
        other = [i for i in order if separated(a1, int(amin[i]))]
        if other:
            y2 = pts[other[0]]
            lo, hi = bisect_switch(argmin_at, separated, y1, y2)
            for y in (0.5 * (lo + hi), lo, hi):
                if not inside(y):
                    continue
                vals = _objective(images, phi_values, y)
                ev = default_eps_v(float(vals.min())) if eps_v is None else eps_v
                clusters = argmin_clusters(vals, domain, ev, eps_s)
                if len(clusters) >= 2:
                    spread = max(c.value for c in clusters) - min(c.value for c in clusters)
                    return _witness(y, clusters, vals, r, cert, spread)
        log.info("double-minimum search: level %d found no witness, refining", level)
        center = y1
        spacing = spacing / 4.0
    raise NoWitnessFound("no lattice point produced two separated global minima",
                         best=None if best_seen is None else best_seen[2])


def _witness(y, clusters, vals, r, cert, defect):
    return DoubleMinWitness(
        y0=np.asarray(y, dtype=float).copy(),
        clusters=clusters,
        objective_min=float(vals.min()),
        ball_radius_used=float(r),
        margin=float(cert.margin),
        defect=float(defect),
    )


def verify_double_minimum(y0, psi, X_domain, phi, eps_v=None, eps_s=None):
    """Brute-force recount of the global minima at ``y0`` over the whole grid.

    Deliberately independent of the search path: plain numpy evaluation and
    the scipy connected-components clustering.
    """
    y0 = np.asarray(y0, dtype=float)
    images = np.asarray(X_domain.samples if psi is None else psi(X_domain.samples), dtype=float)
    phi_values = np.asarray(phi.values if isinstance(phi, Perturbation) else phi, dtype=float)
    vals = ((images - y0) ** 2).sum(axis=1) + phi_values
    vmin = float(vals.min())
    if eps_v is None:
        eps_v = default_eps_v(vmin)
    if eps_s is None:
        eps_s = default_eps_s(X_domain)
    members = np.flatnonzero(vals <= vmin + eps_v)
    pts = X_domain.samples[members]
    labels = kernels.cluster_labels_numpy(pts, float(eps_s))
    clusters = []
    for lab in range(int(labels.max()) + 1):
        pos = np.flatnonzero(labels == lab)
        best = pos[np.argmin(vals[members[pos]])]
        clusters.append(ArgminCluster([int(m) for m in members[pos]], pts[best].copy(),
                                      float(vals[members[best]])))
    return VerificationReport(y0, clusters, vmin, float(eps_v), float(eps_s))
