import numpy as np
import pytest

from multiplicity_lab import DomainError, EmptySetError, HypothesisError
from multiplicity_lab import chebyshev as C
from multiplicity_lab.hilbert import Perturbation, circle, dist_to_set, point_cloud, segment

TWO = point_cloud([[-1.0], [1.0]])
EPS = 0.1
PHI = Perturbation([0.0, EPS])


def test_rho_r_two_points_and_circle():
    # min((y +- 1)^2) - y^2 = 1 - 2|y| peaks at y = 0
    for r in (0.01, 0.5, 3.0):
        assert C.rho_r([0.0], TWO, r) == pytest.approx(1.0, abs=1e-12)
    X = circle(720)
    for r in (0.1, 1.0, 5.0):
        assert C.rho_r([0.0, 0.0], X, r) == pytest.approx(1.0, abs=1e-3)


def test_rho_r_small_ball_tends_to_delta_squared():
    u0 = [0.3, 0.2]
    X = circle(720)
    d = dist_to_set(u0, X)
    assert abs(C.rho_r(u0, X, 1e-6) - d * d) <= 2 * d * 1e-6 + 1e-12


def test_rho_r_refuses_points_on_the_set():
    with pytest.raises(DomainError):
        C.rho_r([1.0], TWO, 0.5)


@pytest.mark.parametrize("u0", [[0.3, 0.2], [0.5, 0.0], [-0.1, 0.6]])
def test_rho_r_envelope_and_monotone(u0):
    X = circle(720)
    d = dist_to_set(u0, X)
    radii = [0.05, 0.1, 0.2, 0.4, 0.8, 1.6]
    vals = [C.rho_r(u0, X, r) for r in radii]
    for r, v in zip(radii, vals):
        assert d * d <= v <= d * d + 2 * d * r + 1e-12
    # lower estimates from different sample sets; agreement to estimator accuracy
    assert np.all(np.diff(vals) >= -1e-9)


def test_grid_refinement_moves_delta_and_rho_within_chord():
    u0 = [0.3, 0.2]
    coarse, fine = circle(360), circle(720)
    chord = 2 * np.sin(np.pi / 360)
    assert abs(dist_to_set(u0, coarse) - dist_to_set(u0, fine)) <= chord
    assert abs(C.rho_r(u0, coarse, 1.0) - C.rho_r(u0, fine, 1.0)) <= 2 * chord


def test_two_point_admissible_exactly_above_eps_over_two():
    r_grid = [0.01, 0.04, 0.05 - 1e-12, 0.05, 0.05 + 1e-12, 0.06, 1.0]
    certs = C.admissible_r_scan([0.0], TWO, PHI, r_grid)
    assert [c.admissible for c in certs] == [False, False, False, False, True, True, True]
    for c in certs:
        assert c.margin == pytest.approx(c.r - EPS / 2, abs=1e-12)
        assert c.threshold == pytest.approx(EPS / 2, abs=1e-12)


def test_zero_perturbation_admits_every_radius():
    certs = C.admissible_r_scan([0.0], TWO, Perturbation.zero(2), [1e-6, 1e-3, 1.0])
    assert all(c.admissible for c in certs)


def test_margin_is_homogeneous():
    c = 3.0
    m1 = C.certificate_margin(0.2, 1.0, 1.0, 0.1)
    # lengths scale by c, squared quantities by c^2
    mc = C.certificate_margin(c * 0.2, c * 1.0, c * c * 1.0, c * c * 0.1)
    assert mc == pytest.approx(c * m1, rel=1e-14)


def test_empty_radius_grid():
    with pytest.raises(EmptySetError):
        C.admissible_r_scan([0.0], TWO, PHI, [])


def test_two_point_witness_at_eps_over_four():
    (cert,) = C.admissible_r_scan([0.0], TWO, PHI, [0.1])
    w = C.find_double_minimum([0.0], None, TWO, PHI, cert)
    assert abs(w.y0[0] - EPS / 4) <= 1e-6
    assert [c.representative[0] for c in w.clusters] == [-1.0, 1.0]
    rep = C.verify_double_minimum(w.y0, None, TWO, PHI)
    assert rep.n_clusters == 2
    assert abs(rep.values[0] - rep.values[1]) <= 1e-12
    assert np.linalg.norm(w.y0) < cert.r
    d = w.to_dict()
    assert set(d) >= {"y0", "radius", "clusters", "margin"}


def test_symmetric_two_point_witness_is_zero():
    phi = Perturbation.zero(2)
    (cert,) = C.admissible_r_scan([0.0], TWO, phi, [0.5])
    w = C.find_double_minimum([0.0], None, TWO, phi, cert)
    assert w.y0[0] == 0.0


def test_circle_medial_point():
    X = circle(720)
    phi = Perturbation.zero(720)
    (cert,) = C.admissible_r_scan([0.0, 0.0], X, phi, [1.0])
    w = C.find_double_minimum([0.0, 0.0], None, X, phi, cert)
    assert np.linalg.norm(w.y0) < 1e-4
    assert len(w.clusters) >= 2
    rep = C.verify_double_minimum(w.y0, None, X, phi)
    assert rep.n_clusters >= 2
    # the certificate recomputed from the verified inputs is still admissible
    assert C.certificate_margin(cert.r, dist_to_set([0, 0], X), C.rho_r([0, 0], X, cert.r), 0.0) > 0


def test_verify_off_medial_axis_gives_one_cluster():
    X = circle(720)
    rep = C.verify_double_minimum([0.5, 0.0], None, X, Perturbation.zero(720))
    assert rep.n_clusters == 1
    assert np.allclose(rep.clusters[0].representative, [1.0, 0.0])


def test_verify_on_convex_set_gives_one_cluster():
    X = segment([-1.0, 0.0], [1.0, 0.0], 2001)
    rep = C.verify_double_minimum([0.0, 0.5], None, X, Perturbation.zero(2001))
    assert rep.n_clusters == 1


def test_convex_image_is_rejected():
    X = segment([-1.0, 0.0], [1.0, 0.0], 401)
    phi = Perturbation.zero(401)
    (cert,) = C.admissible_r_scan([0.0, 0.5], X, phi, [0.2])
    with pytest.raises(HypothesisError):
        C.find_double_minimum([0.0, 0.5], None, X, phi, cert)


def test_nonconvexity_certificate():
    assert C.check_nonconvex(TWO.samples).nonconvex
    assert not C.check_nonconvex(segment([0, 0], [1, 1], 201).samples, 2 ** 0.5 / 200).nonconvex
    X = circle(720)
    assert C.check_nonconvex(X.samples, X.resolution).nonconvex


def test_ellipse_image_two_nearest_parameters():
    t = np.linspace(0, 2 * np.pi, 720, endpoint=False)
    from multiplicity_lab.hilbert import parametric_curve

    D = parametric_curve(lambda s: s[:, None], t)
    psi = lambda s: np.column_stack([2 * np.cos(s[:, 0]), np.sin(s[:, 0])])  # noqa: E731
    phi = Perturbation.zero(720)
    Y = point_cloud(psi(D.samples))
    (cert,) = C.admissible_r_scan([0.0, 0.0], Y, phi, [0.5])
    w = C.find_double_minimum([0.0, 0.0], psi, D, phi, cert)
    params = sorted(c.representative[0] for c in w.clusters)
    assert params == pytest.approx([np.pi / 2, 3 * np.pi / 2], abs=1e-12)
