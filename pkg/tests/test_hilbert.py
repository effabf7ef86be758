import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multiplicity_lab import DimensionError, EmptySetError, NonFiniteError
from multiplicity_lab.hilbert import (
    Perturbation,
    argmin_clusters,
    circle,
    cluster_points,
    dist_to_set,
    dist_to_set_many,
    eps_argmin,
    oscillation,
    point_cloud,
    read_setspec,
    segment,
    write_setspec,
)

TWO = point_cloud([[-1.0], [1.0]])


def test_distance_to_circle_from_centre():
    X = circle(360)
    # chord sagitta at 1 degree bounds the grid error
    assert abs(dist_to_set([0.0, 0.0], X) - 1.0) <= 2e-4


def test_distance_zero_on_a_sample():
    assert dist_to_set([1.0, 0.0], circle(360)) == 0.0


def test_distance_two_points():
    assert dist_to_set([0.0], TWO) == 1.0


def test_distance_dimension_mismatch():
    with pytest.raises(DimensionError):
        dist_to_set([0.0, 0.0], TWO)


def test_empty_and_nonfinite_sets_rejected():
    with pytest.raises((EmptySetError, DimensionError)):
        point_cloud(np.empty((0, 2)))
    with pytest.raises(NonFiniteError):
        point_cloud([[0.0, np.nan]])


def test_eps_argmin_keeps_ties():
    eps = 0.1
    y = eps / 4
    F = (TWO.samples[:, 0] - y) ** 2 + np.array([0.0, eps])
    assert eps_argmin(F, TWO, 1e-9) == [0, 1]


def test_eps_argmin_constant_and_increasing():
    X = point_cloud(np.arange(5.0)[:, None])
    assert eps_argmin(np.full(5, 3.0), X, 1e-9) == [0, 1, 2, 3, 4]
    assert eps_argmin(np.arange(5.0), X, 1e-9) == [0]


def test_eps_argmin_rejects_nonfinite():
    with pytest.raises(NonFiniteError):
        eps_argmin(np.array([0.0, np.inf]), TWO, 1e-9)


def test_eps_argmin_callable_objective():
    assert eps_argmin(lambda i: (i - 2.0) ** 2, 5, 1e-9) == [2]


def test_cluster_examples():
    assert len(cluster_points([[-1.0], [1.0]], 0.5)) == 2
    assert len(cluster_points([[0.0], [0.01]], 0.5)) == 1
    assert len(cluster_points(circle(360).samples, 1e-3)) == 360


def test_cluster_order_follows_first_appearance():
    cl = cluster_points([[5.0], [0.0], [5.01], [0.02]], 0.1)
    assert [c.members for c in cl] == [[0, 2], [1, 3]]


def test_oscillation_examples():
    assert oscillation(Perturbation.zero(4)) == 0.0
    assert oscillation(Perturbation([0.0, 0.1])) == 0.1
    x = np.linspace(-2, 2, 4001)
    assert abs(oscillation(Perturbation(np.sin(5 * x))) - 2.0) <= 1e-4


def test_perturbation_bounds_are_sample_extrema():
    phi = Perturbation([0.3, -1.0, 2.5])
    assert (phi.lo, phi.hi) == (-1.0, 2.5)
    assert all(phi.lo <= phi(i) <= phi.hi for i in range(3))


def test_argmin_clusters_two_point_double_minimum():
    y = 0.025
    vals = (TWO.samples[:, 0] - y) ** 2 + np.array([0.0, 0.1])
    cl = argmin_clusters(vals, TWO.samples, 1e-9, 0.5)
    assert [c.representative[0] for c in cl] == [-1.0, 1.0]


pts2 = st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=1, max_size=30)


@settings(max_examples=60, deadline=None)
@given(pts2, st.tuples(st.floats(-5, 5), st.floats(-5, 5)), st.tuples(st.floats(-5, 5), st.floats(-5, 5)))
def test_distance_is_one_lipschitz(cloud, p, q):
    X = point_cloud(np.array(cloud))
    p, q = np.array(p), np.array(q)
    assert abs(dist_to_set(p, X) - dist_to_set(q, X)) <= np.linalg.norm(p - q) + 1e-12


@settings(max_examples=60, deadline=None)
@given(pts2, st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=1, max_size=10))
def test_distance_matches_brute_force(cloud, queries):
    X = point_cloud(np.array(cloud))
    Q = np.array(queries)
    brute = np.sqrt(((Q[:, None, :] - X.samples[None, :, :]) ** 2).sum(-1)).min(axis=1)
    assert np.allclose(dist_to_set_many(Q, X), brute, rtol=1e-12, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=1, max_size=40), st.floats(-1e3, 1e3))
def test_eps_argmin_shift_invariant(values, c):
    v = np.array(values)
    # shifting by c moves values by up to |c| ulps, so keep the gap test coarse
    assert eps_argmin(v, len(v), 1e-6) == eps_argmin(v + c, len(v), 1e-6 + 1e-12 * abs(c))


@settings(max_examples=60, deadline=None)
@given(pts2, st.floats(0.01, 3.0))
def test_cluster_points_idempotent(cloud, eps):
    cl = cluster_points(np.array(cloud), eps)
    reps = np.array([c.representative for c in cl])
    assert len(cluster_points(reps, eps)) == len(cl)


def test_setspec_csv_roundtrip(tmp_path):
    X = point_cloud([[0.1, 0.2], [1.0 / 3.0, -4.0]])
    Y = read_setspec(write_setspec(X, tmp_path / "x.csv"))
    assert Y.kind == "point-cloud" and np.array_equal(X.samples, Y.samples)
    assert (tmp_path / "x.csv").read_text().splitlines()[0] == "dim,c0,c1"


def test_parametric_sidecar_roundtrip(tmp_path):
    X = segment([0.0, 0.0], [1.0, 2.0], 11)
    path = write_setspec(X, tmp_path / "seg.csv")
    Y = read_setspec(path)
    assert Y.kind == "parametric-curve"
    assert np.array_equal(X.params, Y.params) and np.array_equal(X.samples, Y.samples)
    assert Y.resolution == pytest.approx(np.sqrt(5) / 10)
