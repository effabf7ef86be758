"""Finite-dimensional inner-product-space substrate.

Points are 1-D float arrays.  A :class:`SetSpec` is a finite sample grid
standing in for a closed set; every "inf/sup over X" in the rest of the
package is an exact extremum over these samples.
"""

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull
from scipy.spatial.distance import pdist

from . import kernels
from .errors import DimensionError, EmptySetError, NonFiniteError


def as_point(p, dim=None):
    arr = np.atleast_1d(np.asarray(p, dtype=float))
    if arr.ndim != 1:
        raise DimensionError(f"a point must be a flat coordinate vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError("point has non-finite coordinates")
    if dim is not None and arr.shape[0] != dim:
        raise DimensionError(f"expected a point of dimension {dim}, got {arr.shape[0]}")
    return arr


def as_points(points, dim=None):
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DimensionError(f"expected a (k, n) array of points, got shape {arr.shape}")
    if dim is not None and arr.shape[1] != dim:
        raise DimensionError(f"expected points of dimension {dim}, got {arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError("point set has non-finite coordinates")
    return np.ascontiguousarray(arr)


@dataclass(frozen=True)
class SetSpec:
    """A non-convex target set given by its samples.

    ``resolution`` is the sampling chord used by non-convexity tests: zero
    for a genuine finite point cloud, the largest gap between consecutive
    samples for a sampled curve.
    """

    kind: str
    samples: np.ndarray
    provenance: str = ""
    params: np.ndarray | None = None
    resolution: float = 0.0

    def __post_init__(self):
        if self.kind not in ("point-cloud", "parametric-curve"):
            raise ValueError(f"unknown set kind {self.kind!r}")
        samples = as_points(self.samples)
        if samples.shape[0] == 0:
            raise EmptySetError("a set specification needs at least one sample")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        if self.kind == "parametric-curve":
            if self.params is None or len(self.params) != samples.shape[0]:
                raise ValueError("parametric curves need one parameter per sample")
            params = np.asarray(self.params, dtype=float)
            params.setflags(write=False)
            object.__setattr__(self, "params", params)

    @property
    def dim(self):
        return self.samples.shape[1]

    def __len__(self):
        return self.samples.shape[0]

    def diameter(self):
        return set_diameter(self.samples)


def point_cloud(points, provenance=""):
    return SetSpec("point-cloud", as_points(points), provenance)


def parametric_curve(fn, params, provenance="", closed=False):
    """Sample ``fn`` (vectorised: params -> (k, n)) on a stored grid."""
    params = np.asarray(params, dtype=float)
    samples = as_points(fn(params))
    gaps = np.linalg.norm(np.diff(samples, axis=0), axis=1)
    if closed and len(samples) > 1:
        gaps = np.append(gaps, np.linalg.norm(samples[0] - samples[-1]))
    resolution = float(gaps.max()) if gaps.size else 0.0
    return SetSpec("parametric-curve", samples, provenance, params, resolution)


def circle(n_samples, radius=1.0, center=(0.0, 0.0)):
    params = 2 * np.pi * np.arange(n_samples) / n_samples
    c = np.asarray(center, dtype=float)

    def fn(t):
        return c + radius * np.column_stack([np.cos(t), np.sin(t)])

    return parametric_curve(fn, params, f"circle(r={radius}, n={n_samples})", closed=True)


def segment(a, b, n_samples):
    a = as_point(a)
    b = as_point(b, a.shape[0])
    params = np.linspace(0.0, 1.0, n_samples)

    def fn(t):
        return a + t[:, None] * (b - a)

    return parametric_curve(fn, params, f"segment({a.tolist()}, {b.tolist()})")


def set_diameter(samples):
    samples = as_points(samples)
    if len(samples) < 2:
        return 0.0
    if samples.shape[1] == 1:
        return float(samples.max() - samples.min())
    pts = samples
    if len(pts) > 4000:
        try:
            pts = pts[ConvexHull(pts).vertices]
        except Exception:  # degenerate hull; fall back to all samples
            pass
    return float(pdist(pts).max())


@dataclass(frozen=True)
class Perturbation:
    """A bounded function on the samples of a set, with certified bounds."""

    values: np.ndarray
    lo: float = field(default=np.nan)
    hi: float = field(default=np.nan)

    def __post_init__(self):
        vals = np.atleast_1d(np.asarray(self.values, dtype=float)).copy()
        if not np.all(np.isfinite(vals)):
            raise NonFiniteError("perturbation values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        # the certified bounds are the exact sample extrema
        object.__setattr__(self, "lo", float(vals.min()))
        object.__setattr__(self, "hi", float(vals.max()))

    @classmethod
    def zero(cls, k):
        return cls(np.zeros(k))

    def __call__(self, i):
        return self.values[i]

    def __len__(self):
        return len(self.values)


def oscillation(phi):
    return phi.hi - phi.lo


@dataclass(frozen=True)
class ArgminCluster:
    members: list
    representative: np.ndarray
    value: float

    def to_dict(self):
        return {
            "members": [int(m) for m in self.members],
            "representative": [float(c) for c in self.representative],
            "value": float(self.value),
        }


def _check_dims(p, X):
    p = as_point(p)
    if len(X) == 0:
        raise EmptySetError("distance to an empty set is undefined")
    if p.shape[0] != X.dim:
        raise DimensionError(f"point has dimension {p.shape[0]}, set has dimension {X.dim}")
    return p


def dist_to_set(p, X):
    p = _check_dims(p, X)
    d2, _ = kernels.min_sqdist(p[None, :], X.samples)
    return float(np.sqrt(d2[0]))


def dist_to_set_many(queries, X):
    """Vectorised :func:`dist_to_set` for a (m, n) batch of points."""
    queries = as_points(queries, X.dim)
    d2, _ = kernels.min_sqdist(queries, X.samples)
    return np.sqrt(d2)


def nearest_index(p, X):
    p = _check_dims(p, X)
    _, arg = kernels.min_sqdist(p[None, :], X.samples)
    return int(arg[0])


def default_eps_v(min_value):
    return 1e-8 * (1.0 + abs(min_value))


def default_eps_s(X):
    diam = X.diameter() if isinstance(X, SetSpec) else set_diameter(X)
    return 1e-3 * diam if diam > 0 else 1e-9


def eps_argmin(F, X, eps_v):
    """Indices i (in sample order) with F(i) <= min F + eps_v.

    ``F`` is either an array of objective values over the samples of ``X``
    or a callable evaluated on the index array.  Ties are never broken.
    """
    if eps_v <= 0:
        raise ValueError("eps_v must be positive")
    k = len(X) if isinstance(X, SetSpec) else int(X)
    values = F(np.arange(k)) if callable(F) else F
    values = np.asarray(values, dtype=float)
    if values.shape != (k,):
        raise DimensionError(f"objective has shape {values.shape}, expected ({k},)")
    if not np.all(np.isfinite(values)):
        raise NonFiniteError("objective is non-finite at some sample")
    return np.flatnonzero(values <= values.min() + eps_v).tolist()


def cluster_points(points, eps_s, values=None, indices=None):
    """Single-linkage clustering at threshold ``eps_s``.

    Returns one :class:`ArgminCluster` per connected component, ordered by
    first appearance in ``points``.  ``indices`` (defaults to positions)
    label the members; ``values`` pick each cluster's representative (its
    lowest-valued member, first on ties) and its value.
    """
    if eps_s <= 0:
        raise ValueError("eps_s must be positive")
    pts = as_points(points)
    k = len(pts)
    if k == 0:
        return []
    idx = np.arange(k) if indices is None else np.asarray(indices)
    vals = np.zeros(k) if values is None else np.asarray(values, dtype=float)
    labels = kernels.cluster_labels(pts, float(eps_s))
    clusters = []
    for lab in range(int(labels.max()) + 1):
        pos = np.flatnonzero(labels == lab)
        best = pos[np.argmin(vals[pos])]
        value = float(vals[best]) if values is not None else float("nan")
        clusters.append(ArgminCluster([int(i) for i in idx[pos]], pts[best].copy(), value))
    return clusters


def argmin_clusters(values, domain_points, eps_v=None, eps_s=None):
    """Near-global minimisers of ``values`` grouped into separated clusters."""
    values = np.asarray(values, dtype=float)
    if eps_v is None:
        eps_v = default_eps_v(float(values.min()))
    if eps_s is None:
        eps_s = default_eps_s(domain_points)
    members = eps_argmin(values, len(values), eps_v)
    pts = as_points(domain_points)[members]
    return cluster_points(pts, eps_s, values=values[members], indices=members)


def bisect_switch(argmin_at, separated, lo, hi, tol=1e-13, max_iter=200):
    """Bisect the segment [lo, hi] towards a point where the global argmin jumps.

    ``argmin_at(y)`` returns the index of the global minimiser at parameter
    ``y`` and ``separated(i, j)`` says whether two minimisers lie in distinct
    clusters.  Requires the argmins at the two ends to be separated; the
    returned pair brackets the jump to within ``tol``.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    a_lo = argmin_at(lo)
    a_hi = argmin_at(hi)
    if not separated(a_lo, a_hi):
        return lo, hi
    for _ in range(max_iter):
        if np.linalg.norm(hi - lo) <= tol:
            break
        mid = 0.5 * (lo + hi)
        if np.array_equal(mid, lo) or np.array_equal(mid, hi):
            break
        a_mid = argmin_at(mid)
        if separated(a_lo, a_mid):
            hi, a_hi = mid, a_mid
        else:
            lo, a_lo = mid, a_mid
            if not separated(a_lo, a_hi):
                break
    return lo, hi


# --------------------------------------------------------------------------
# serialisation
# --------------------------------------------------------------------------


def write_setspec(X, path):
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["dim"] + [f"c{i}" for i in range(X.dim)])
        for row in X.samples:
            w.writerow([X.dim] + [repr(float(c)) for c in row])
    if X.kind == "parametric-curve":
        meta = {
            "kind": "parametric",
            "params": [float(t) for t in X.params],
            "provenance": X.provenance,
            "resolution": X.resolution,
        }
        Path(str(path) + ".json").write_text(json.dumps(meta))
    return path


def read_setspec(path):
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "dim":
        raise ValueError(f"{path}: missing 'dim,c0,...' header")
    dim = len(rows[0]) - 1
    data = []
    for row in rows[1:]:
        if not row:
            continue
        if int(row[0]) != dim or len(row) != dim + 1:
            raise DimensionError(f"{path}: row {row} does not match dimension {dim}")
        data.append([float(c) for c in row[1:]])
    samples = np.array(data, dtype=float).reshape(-1, dim)
    sidecar = Path(str(path) + ".json")
    if sidecar.exists():
        meta = json.loads(sidecar.read_text())
        if meta.get("kind") == "parametric":
            return SetSpec(
                "parametric-curve",
                samples,
                meta.get("provenance", str(path)),
                np.asarray(meta["params"], dtype=float),
                float(meta.get("resolution", 0.0)),
            )
    return SetSpec("point-cloud", samples, str(path))
