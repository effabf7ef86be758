import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multiplicity_lab import chebyshev as C
from multiplicity_lab import minimax as M
from multiplicity_lab.hilbert import Perturbation, circle, point_cloud
from multiplicity_lab.sampling import ball_points

TWO = point_cloud([[-1.0], [1.0]])

vec3 = st.lists(st.floats(-10, 10), min_size=3, max_size=3).map(np.array)


@settings(max_examples=80, deadline=None)
@given(vec3, vec3, vec3, st.floats(-5, 5), st.floats(-5, 5))
def test_pairing_is_bilinear(a, b, v, s, t):
    lhs = M.pairing(s * a + t * b, v)
    assert lhs == pytest.approx(s * M.pairing(a, v) + t * M.pairing(b, v), abs=1e-9)
    lhs = M.pairing(v, s * a + t * b)
    assert lhs == pytest.approx(s * M.pairing(v, a) + t * M.pairing(v, b), abs=1e-9)


def test_gap_eta_x_on_two_points():
    F = M.tabulate(lambda x, y: y * x, [-1.0, 1.0], np.linspace(-1, 1, 201))
    g = M.minimax_gap(F)
    assert (g.sup_inf, g.inf_sup, g.gap) == (0.0, 1.0, 1.0)


def test_gap_constant_is_zero():
    assert M.minimax_gap(np.full((4, 7), 2.5)).gap == 0.0


def test_gap_x2_plus_xy_refines():
    f = lambda x, y: x ** 2 + x * y  # noqa: E731
    g1 = M.minimax_gap(M.tabulate(f, np.linspace(-2, 2, 401), np.linspace(0, 1, 101)))
    g2 = M.minimax_gap(M.tabulate(f, np.linspace(-2, 2, 801), np.linspace(0, 1, 201)))
    assert 0 <= g1.gap < 1e-2
    assert g2.gap <= g1.gap
    hyp = M.check_minimax_hypotheses(f, np.linspace(-2, 2, 401), np.linspace(0, 1, 101))
    assert hyp.unique_minimum and hyp.quasi_concave


def test_hypothesis_check_flags_non_quasi_concave():
    f = lambda x, y: np.cos(6 * y) * (1 + x ** 2)  # noqa: E731
    hyp = M.check_minimax_hypotheses(f, np.linspace(-1, 1, 41), np.linspace(0, 2, 81))
    assert not hyp.quasi_concave


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31))
def test_weak_duality_on_random_matrices(seed):
    F = np.random.default_rng(seed).normal(size=(13, 9))
    assert M.minimax_gap(F).gap >= 0


def test_sup_inf_bound_two_points():
    etas = np.array([[-2.0], [-0.5], [0.0], [0.7], [3.0]])
    rep = M.check_sup_inf_bound(np.zeros(2), None, [0, 1], [0.5, 0.5], etas, TWO)
    assert rep.ok and rep.max_I == 0.0
    # inf_x eta x = -|eta|, so the slack is |eta| and tightest at eta = 0
    assert rep.tightest_slack == 0.0


def test_sup_inf_bound_single_point():
    rng = np.random.default_rng(3)
    X = point_cloud(rng.normal(size=(9, 2)))
    vals = rng.normal(size=9)
    rep = M.check_sup_inf_bound(vals, None, [4], [1.0], rng.normal(size=(50, 2)), X)
    assert rep.ok and rep.max_I == vals[4]


def test_sup_inf_bound_weight_errors():
    with pytest.raises(ValueError):
        M.check_sup_inf_bound(np.zeros(2), None, [0, 1], [0.5, 0.6], [[0.0]], TWO)
    with pytest.raises(ValueError):
        M.check_sup_inf_bound(np.zeros(2), None, [0, 1], [1.5, -0.5], [[0.0]], TWO)


def test_sup_inf_bound_random_instances():
    rng = np.random.default_rng(11)
    for _ in range(300):
        X, vals, images, xs, w, n = M.random_sup_inf_instance(rng)
        etas = rng.normal(scale=3.0, size=(100, n))
        assert M.check_sup_inf_bound(vals, lambda s, im=images: im, xs, w, etas, X).violations == 0


def test_linear_sup_over_ball():
    assert M.linear_sup_over_ball([0.0, 0.0], 1.0) == 0.0
    assert M.linear_sup_over_ball([3.0, 4.0], 2.0) == 10.0
    v = np.array([3.0, 4.0])
    assert M.linear_sup_over_ball(2 * v, 3.0) == pytest.approx(6 * M.linear_sup_over_ball(v, 1.0))


def test_linear_sup_sampled_from_below():
    v = np.array([3.0, -1.0, 2.0])
    exact = M.linear_sup_over_ball(v, 2.0)
    prev = -np.inf
    for count in (100, 1000, 10_000):
        s = float((ball_points(3, 2.0, count) @ v).max())
        assert prev - 1e-12 <= s <= exact
        prev = s
    assert exact - prev < 0.05 * exact


def test_ball_condition_two_points():
    rep = M.ball_condition_margin(np.zeros(2), None, Perturbation.zero(2), [0.0], 1.0, TWO)
    assert rep.inf_sup_term == 1.0
    assert rep.sup_inf_term == pytest.approx(0.0, abs=1e-12)
    assert rep.margin == pytest.approx(1.0, abs=1e-12)
    # the margin is affine in the oscillation
    rep2 = M.ball_condition_margin(np.zeros(2), None, Perturbation([0.0, 0.3]), [0.0], 1.0, TWO)
    assert rep2.margin == pytest.approx(rep.margin - 0.3, abs=1e-12)


def test_positive_margin_makes_minimax_strict():
    phi = Perturbation([0.0, 0.2])
    rep = M.ball_condition_margin(np.zeros(2), None, phi, [0.0], 1.0, TWO)
    br = M.minimax_bridge(np.zeros(2), None, phi, [0.0], 1.0, TWO)
    assert rep.margin > 0 and br.strict


@pytest.mark.parametrize("r", [0.03, 0.049, 0.051, 0.2, 1.0])
def test_nearest_point_instance_agrees_in_sign(r):
    phi = Perturbation([0.0, 0.1])
    I8, phi8 = M.nearest_point_instance([0.0], None, TWO, phi)
    rep = M.ball_condition_margin(I8, None, phi8, [0.0], r, TWO)
    (cert,) = C.admissible_r_scan([0.0], TWO, phi, [r])
    assert (rep.margin > 0) == cert.admissible


def test_nearest_point_instance_on_circle():
    X = circle(180)
    phi = Perturbation(np.linspace(0, 0.05, 180))
    for r in (0.01, 0.5):
        I8, phi8 = M.nearest_point_instance([0.2, 0.1], None, X, phi)
        rep = M.ball_condition_margin(I8, None, phi8, [0.2, 0.1], r, X)
        (cert,) = C.admissible_r_scan([0.2, 0.1], X, phi, [r])
        assert (rep.margin > 0) == cert.admissible


@pytest.mark.parametrize("I, eta", [(lambda x: 0 * x[:, 0], 0.0), (lambda x: x[:, 0] ** 2, 0.0),
                                    (lambda x: x[:, 0], -1.0)])
def test_eta_witnesses(I, eta):
    w = M.find_eta_two_minima(I(TWO.samples), None, TWO)
    assert w.eta[0] == pytest.approx(eta, abs=1e-12)
    assert len(w.clusters) == 2
