import csv
import math

import numpy as np
import pytest

from multiplicity_lab import DomainError, HypothesisError
from multiplicity_lab import kirchhoff as K
from multiplicity_lab.functions import coefficient, reaction


def problem(f="identity", omega="reciprocal", rho=1.0, n=200):
    return K.KirchhoffProblem(reaction(f), coefficient(omega, rho), rho, n)


EIGEN = problem()
BETA_EIGEN = 2 * math.pi ** 2


def eigen_forcing(p):
    return K.make_forcing([0.0], [BETA_EIGEN], p.t)


@pytest.fixture(scope="module")
def eigen_states():
    found = K.solve_multistart(EIGEN, eigen_forcing(EIGEN), K.default_starts(EIGEN, 50, seed=0))
    return [s for s, _ in found]


def test_energy_of_eigenfunction():
    s = K.eigen_state(EIGEN)
    assert s.q == pytest.approx(0.5, abs=1e-4)
    # continuum value: 1/2 ln 2 - 1/2
    E = K.energy(s, EIGEN, eigen_forcing(EIGEN))
    assert E == pytest.approx(0.5 * math.log(2) - 0.5, abs=5e-4)


def test_energy_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    p = problem(f="sin", n=40)
    forcing = K.make_forcing([0.3, -0.2], [1.5, 0.4], p.t)
    worst = 0.0
    for _ in range(100):
        u = rng.normal(size=p.n)
        u *= rng.uniform(0.05, 0.9) * math.sqrt(p.q_max) / math.sqrt(K.kernels.dirichlet_energy(u, p.h))
        s = K.make_state(p, u)
        g = K.energy_gradient(s, p, forcing)
        d = rng.normal(size=p.n)
        d /= np.linalg.norm(d)
        eps = 1e-6
        fd = (K.energy(K.make_state(p, u + eps * d), p, forcing)
              - K.energy(K.make_state(p, u - eps * d), p, forcing)) / (2 * eps)
        worst = max(worst, abs(fd - g @ d) / max(abs(g @ d), np.linalg.norm(g) * 1e-3))
    assert worst < 1e-6


def test_eigen_case_has_three_states(eigen_states):
    assert len(eigen_states) == 3
    assert K.symmetric_closed(eigen_states, EIGEN.h)
    sups = sorted(s.sup() for s in eigen_states)
    assert sups[0] == 0.0
    for s in eigen_states:
        r, margin = K.residual_check(s, EIGEN, eigen_forcing(EIGEN))
        assert r < 1e-8 and margin > 0


def test_eigen_case_converges_at_second_order(eigen_states):
    exact = math.sin(math.pi * 0.5) / math.pi
    errs = []
    for n, states in ((200, eigen_states), (400, None)):
        p = EIGEN.with_n(n)
        if states is None:
            found = K.solve_multistart(p, eigen_forcing(p), K.default_starts(p, 20, seed=0))
            states = [s for s, _ in found]
        s = max(states, key=lambda s: float(s.u.sum()))
        ref = np.sin(math.pi * p.t) / math.pi
        errs.append(float(np.abs(s.u - ref).max()))
        assert s.u.max() == pytest.approx(exact, abs=1e-3)
    assert errs[0] < 1e-3
    assert 3.5 <= errs[0] / errs[1] <= 4.5


def test_exact_eigenfunction_residual_is_small():
    s = K.eigen_state(EIGEN)
    r, _ = K.residual_check(s, EIGEN, eigen_forcing(EIGEN))
    assert r < 5e-3


def test_parabola_for_constant_reaction():
    p = problem(f="one")
    forcing = K.make_forcing([1.0], [0.0], p.t)
    (s, _), = K.solve_multistart(p, forcing, K.default_starts(p, 10, seed=0))
    q_star = 7 - 4 * math.sqrt(3)
    u_star = 0.5 * (1 - q_star) * p.t * (1 - p.t)
    assert np.abs(s.u - u_star).max() < 1e-6
    # piecewise-linear interpolation lowers q by O(h^2)
    assert abs(s.q - q_star) < p.h ** 2
    assert s.q == pytest.approx((1 - s.q) ** 2 * (1 - p.h ** 2) / 12, abs=1e-9)
    assert K.residual_check(s, p, forcing)[0] < 1e-6
    # the quadratic with the discrete amplitude makes the stencil exact;
    # q_h is the small root of c (1 - q)^2 = q, c = (1 - h^2) / 12
    c = (1 - p.h ** 2) / 12
    q_h = ((2 * c + 1) - math.sqrt(4 * c + 1)) / (2 * c)
    u_h = 0.5 * (1 - q_h) * p.t * (1 - p.t)
    assert K.residual_check(K.make_state(p, u_h), p, forcing)[0] < 1e-9
    assert np.abs(s.u - u_h).max() < 1e-9


def test_zero_forcing_gives_only_zero():
    p = problem(f="sin", n=100)
    forcing = K.make_forcing([0.0], [0.0], p.t)
    found = K.solve_multistart(p, forcing, K.default_starts(p, 20, seed=1))
    assert len(found) == 1 and found[0][0].sup() < 1e-10


def test_embedding_holds_on_random_states():
    rng = np.random.default_rng(5)
    p = problem(n=60)
    for _ in range(1000):
        u = rng.normal(size=p.n) * rng.uniform(0.01, 1.0)
        u = u * rng.uniform(0.0, 0.99) * math.sqrt(p.q_max / K.kernels.dirichlet_energy(u, p.h))
        assert K.embedding_check(K.make_state(p, u))


def test_q_constraint_is_enforced():
    p = problem(n=50)
    u = np.sin(math.pi * p.t)  # q = pi^2 / 2 > rho
    with pytest.raises(DomainError):
        K.make_state(p, u)
    with pytest.raises(DomainError):
        K.energy(K.DiscreteState(u, 2.0), p, K.make_forcing([0], [1], p.t))


def test_validate_problem_cases():
    ok = K.validate_problem(problem())
    assert ok["ok"]
    assert ok["decade increments"] == pytest.approx([math.log(10)] * 5, rel=1e-6)
    flat = K.validate_problem(problem(omega="constant"))
    assert not flat["omega~ diverges at rho"] and not flat["ok"]
    neg = K.validate_problem(problem(omega="-x"))
    assert not neg["omega nonnegative"] and not neg["ok"]


@pytest.mark.parametrize("f, rho, expected", [("identity", 1.0, True), ("one", 1.0, False),
                                               ("sin(10*u)", 0.01, True), ("0*u + 2", 4.0, False)])
def test_nonconstancy(f, rho, expected):
    ok, pair = K.nonconstancy_check(reaction(f), rho)
    assert ok is expected
    if ok:
        a, b = pair
        assert abs(a) <= 0.5 * math.sqrt(rho) and abs(b) <= 0.5 * math.sqrt(rho)


def test_search_refuses_constant_reaction():
    with pytest.raises(HypothesisError):
        K.search_alpha_beta(problem(f="one", n=50), K.ForcingFamily())


def test_uniqueness_probe_refuses_nonconstant_reaction():
    with pytest.raises(HypothesisError):
        K.uniqueness_probe(problem(n=50), [])


def test_uniqueness_probe_small():
    p = problem(f="one", n=100)
    forcings = K.random_forcings(np.random.default_rng(0), p.t, 4)
    rep = K.uniqueness_probe(p, forcings, starts_per_forcing=12)
    assert rep["violations"] == 0 and rep["max_spread"] < 1e-8
    assert all(r["midpoint_convex"] for r in rep["forcings"])


def test_search_finds_two_states():
    p = problem(f="u + u**2", n=100)
    pair = K.search_alpha_beta(p, K.ForcingFamily(1, 5.0, 20.0), max_forcings=60, n_starts=20)
    assert len(pair.states) >= 2
    assert pair.separation > 1e-6
    assert max(pair.residuals) < 1e-8
    assert all(c["classical"] for c in pair.certification)


def test_lattice_order_is_by_l1_shell():
    lat = list(K.ForcingFamily(1, 1.0, 2.0).lattice())
    norms = [sum(abs(c) for c in x) for x in lat]
    assert norms == sorted(norms)
    assert len(lat) == len(set(map(tuple, lat)))


def test_state_csv(tmp_path, eigen_states):
    s = max(eigen_states, key=lambda s: float(s.u.sum()))
    path = tmp_path / "state.csv"
    K.write_state_csv(path, EIGEN, s)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "u"]
    assert len(rows) == EIGEN.n + 3
    assert float(rows[1][1]) == 0.0 and float(rows[-1][1]) == 0.0
    assert np.array_equal(np.array([float(r[1]) for r in rows[2:-1]]), s.u)
