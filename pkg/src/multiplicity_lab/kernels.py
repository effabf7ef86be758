"""Hot numeric kernels.

Every kernel exists twice: a numba ``@njit`` version and a pure-numpy
version with identical semantics.  The public name (``min_sqdist``,
``cluster_labels``, ...) is bound at import time to the numba version
unless numba is missing or ``MULTIPLICITY_LAB_NUMBA=0`` is set in the
environment.  Both variants stay importable under ``*_numba`` /
``*_numpy`` names so tests and ``benchmarks/bench_kernels.py`` can compare
them directly.
"""

import itertools
import os

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda fn: fn


def _flag_enabled():
    value = os.environ.get("MULTIPLICITY_LAB_NUMBA", "1").strip().lower()
    return value not in ("0", "false", "no", "off")


USE_NUMBA = HAS_NUMBA and _flag_enabled()

_CHUNK = 2048


# --------------------------------------------------------------------------
# nearest-sample search
# --------------------------------------------------------------------------


@njit(cache=True)
def min_sqdist_numba(queries, samples):
    m, n = queries.shape
    k = samples.shape[0]
    best = np.empty(m)
    arg = np.empty(m, dtype=np.int64)
    for i in range(m):
        b = np.inf
        a = -1
        for j in range(k):
            s = 0.0
            for c in range(n):
                d = queries[i, c] - samples[j, c]
                s += d * d
            if s < b:
                b = s
                a = j
        best[i] = b
        arg[i] = a
    return best, arg


def min_sqdist_numpy(queries, samples):
    m = queries.shape[0]
    best = np.empty(m)
    arg = np.empty(m, dtype=np.int64)
    for start in range(0, m, _CHUNK):
        q = queries[start:start + _CHUNK]
        d = ((q[:, None, :] - samples[None, :, :]) ** 2).sum(axis=2)
        a = np.argmin(d, axis=1)
        arg[start:start + _CHUNK] = a
        best[start:start + _CHUNK] = d[np.arange(len(q)), a]
    return best, arg


# --------------------------------------------------------------------------
# single-linkage clustering
# --------------------------------------------------------------------------


@njit(cache=True)
def _find(parent, i):
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        nxt = parent[i]
        parent[i] = root
        i = nxt
    return root


@njit(cache=True)
def cluster_labels_numba(points, eps):
    k, n = points.shape
    parent = np.arange(k)
    eps2 = eps * eps
    for i in range(k):
        for j in range(i + 1, k):
            s = 0.0
            for c in range(n):
                d = points[i, c] - points[j, c]
                s += d * d
            if s <= eps2:
                ri = _find(parent, i)
                rj = _find(parent, j)
                if ri != rj:
                    if ri < rj:
                        parent[rj] = ri
                    else:
                        parent[ri] = rj
    labels = np.empty(k, dtype=np.int64)
    remap = -np.ones(k, dtype=np.int64)
    nxt = 0
    for i in range(k):
        r = _find(parent, i)
        if remap[r] < 0:
            remap[r] = nxt
            nxt += 1
        labels[i] = remap[r]
    return labels


def cluster_labels_numpy(points, eps):
    k = points.shape[0]
    if k == 0:
        return np.empty(0, dtype=np.int64)
    d2 = ((points[:, None, :] - points[None, :, :]) ** 2).sum(axis=2)
    adj = csr_matrix(d2 <= eps * eps)
    _, raw = connected_components(adj, directed=False)
    # relabel in order of first appearance so both paths agree
    _, first = np.unique(raw, return_index=True)
    order = np.argsort(first)
    remap = np.empty_like(order)
    remap[order] = np.arange(len(order))
    return remap[raw].astype(np.int64)


# --------------------------------------------------------------------------
# lattice screening for the double-minimum search
# --------------------------------------------------------------------------


@njit(cache=True)
def lattice_screen_numba(lattice, images, phi, domain, eps_s):
    """Per lattice point y: min of |psi(x) - y|^2 + phi(x), its argmin, and
    the best value among samples farther than eps_s (in the domain) from
    that argmin."""
    m, n = lattice.shape
    k = images.shape[0]
    dd = domain.shape[1]
    eps2 = eps_s * eps_s
    vmin = np.empty(m)
    amin = np.empty(m, dtype=np.int64)
    vsec = np.empty(m)
    vals = np.empty(k)
    for i in range(m):
        b = np.inf
        a = -1
        for j in range(k):
            s = phi[j]
            for c in range(n):
                d = images[j, c] - lattice[i, c]
                s += d * d
            vals[j] = s
            if s < b:
                b = s
                a = j
        sec = np.inf
        for j in range(k):
            if vals[j] < sec:
                s = 0.0
                for c in range(dd):
                    d = domain[j, c] - domain[a, c]
                    s += d * d
                if s > eps2:
                    sec = vals[j]
        vmin[i] = b
        amin[i] = a
        vsec[i] = sec
    return vmin, amin, vsec


def lattice_screen_numpy(lattice, images, phi, domain, eps_s):
    m = lattice.shape[0]
    vmin = np.empty(m)
    amin = np.empty(m, dtype=np.int64)
    vsec = np.empty(m)
    for start in range(0, m, _CHUNK):
        y = lattice[start:start + _CHUNK]
        vals = ((images[None, :, :] - y[:, None, :]) ** 2).sum(axis=2) + phi[None, :]
        a = np.argmin(vals, axis=1)
        rows = np.arange(len(y))
        far = ((domain[None, :, :] - domain[a][:, None, :]) ** 2).sum(axis=2) > eps_s ** 2
        masked = np.where(far, vals, np.inf)
        amin[start:start + _CHUNK] = a
        vmin[start:start + _CHUNK] = vals[rows, a]
        vsec[start:start + _CHUNK] = masked.min(axis=1)
    return vmin, amin, vsec


# --------------------------------------------------------------------------
# 1-D Dirichlet stencil
# --------------------------------------------------------------------------


@njit(cache=True)
def stiffness_apply_numba(u):
    """(2 u_i - u_{i-1} - u_{i+1}) with zero boundary values."""
    n = u.shape[0]
    out = np.empty(n)
    for i in range(n):
        left = u[i - 1] if i > 0 else 0.0
        right = u[i + 1] if i < n - 1 else 0.0
        out[i] = 2.0 * u[i] - left - right
    return out


def stiffness_apply_numpy(u):
    out = 2.0 * u
    out[1:] -= u[:-1]
    out[:-1] -= u[1:]
    return out


@njit(cache=True)
def dirichlet_energy_numba(u, h):
    """Exact Dirichlet energy of the piecewise-linear interpolant."""
    n = u.shape[0]
    s = 0.0
    prev = 0.0
    for i in range(n):
        d = u[i] - prev
        s += d * d
        prev = u[i]
    s += prev * prev
    return s / h


def dirichlet_energy_numpy(u, h):
    padded = np.concatenate(([0.0], u, [0.0]))
    return float(np.sum(np.diff(padded) ** 2) / h)


if USE_NUMBA:
    min_sqdist = min_sqdist_numba
    cluster_labels = cluster_labels_numba
    lattice_screen = lattice_screen_numba
    stiffness_apply = stiffness_apply_numba
    dirichlet_energy = dirichlet_energy_numba
else:
    min_sqdist = min_sqdist_numpy
    cluster_labels = cluster_labels_numpy
    lattice_screen = lattice_screen_numpy
    stiffness_apply = stiffness_apply_numpy
    dirichlet_energy = dirichlet_energy_numpy

BACKEND = "numba" if USE_NUMBA else "numpy"


def warmup():
    """Compile the dispatched kernels for writable and read-only inputs.

    Set samples and perturbation values are frozen arrays, which numba
    types separately, so every mix is touched.  With ``cache=True`` only
    the first run pays.  A no-op on the numpy backend."""
    if not USE_NUMBA:
        return
    X = np.random.default_rng(0).normal(size=(8, 2))
    R = X.copy()
    R.setflags(write=False)
    phi = np.zeros(8)
    phi_r = phi.copy()
    phi_r.setflags(write=False)
    for A, B in itertools.product((X, R), repeat=2):
        min_sqdist(A, B)
    for A, B, p, D in itertools.product((X, R), (X, R), (phi, phi_r), (X, R)):
        lattice_screen(A, B, p, D, 1e-3)
    for A in (X, R):
        cluster_labels(A, 0.1)
        stiffness_apply(A[:, 0].copy())
        dirichlet_energy(A[:, 0].copy(), 0.1)
