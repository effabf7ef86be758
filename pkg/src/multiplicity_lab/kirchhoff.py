"""The nonlocal two-point problem

    -omega(int |u'|^2) u'' = beta(t) f(u) + alpha(t),   u(0) = u(1) = 0,

discretised on a uniform grid.  States are critical points of

    E(u) = 1/2 omega~(q) - sum_i h (beta_i f~(u_i) + alpha_i u_i),

with q the Dirichlet energy of the piecewise-linear interpolant.  The
gradient is tridiagonal plus a rank-one term, which the Newton phase uses.
"""

import csv
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from . import kernels
from .errors import DomainError, HypothesisError, NoWitnessFound
from .functions import antiderivative, quad_antiderivative

log = logging.getLogger(__name__)


# --------------------------------------------------------------------------
# problem, forcing, states
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class KirchhoffProblem:
    f: object  # ScalarFunction
    omega: object  # ScalarFunction on [0, rho)
    rho: float
    n: int
    margin: float = 1e-3

    @property
    def h(self):
        return 1.0 / (self.n + 1)

    @property
    def t(self):
        return self.h * np.arange(1, self.n + 1)

    @property
    def q_max(self):
        return self.rho * (1.0 - self.margin)

    def with_n(self, n):
        return KirchhoffProblem(self.f, self.omega, self.rho, int(n), self.margin)

    def omega_tilde(self, q):
        return antiderivative(self.omega, q, upper=self.q_max)

    def f_tilde(self, u):
        if self.f.antideriv is not None:
            return np.asarray(self.f.antideriv(u), dtype=float)
        return np.array([quad_antiderivative(self.f, x) for x in np.ravel(u)]).reshape(np.shape(u))


def cosine_basis(t, degree):
    """Columns 1, cos(pi t), ..., cos(d pi t)."""
    t = np.asarray(t, dtype=float)
    return np.cos(np.pi * np.outer(t, np.arange(degree + 1)))


@dataclass(frozen=True)
class Forcing:
    """alpha and beta as cosine polynomials on [0, 1], with nodal values."""

    alpha: tuple
    beta: tuple
    alpha_nodes: np.ndarray = field(repr=False)
    beta_nodes: np.ndarray = field(repr=False)

    @property
    def degree(self):
        return max(len(self.alpha), len(self.beta)) - 1

    def l1_norm(self, samples=4001):
        s = np.linspace(0.0, 1.0, samples)
        a = np.abs(cosine_basis(s, len(self.alpha) - 1) @ np.asarray(self.alpha))
        b = np.abs(cosine_basis(s, len(self.beta) - 1) @ np.asarray(self.beta))
        return float(np.trapezoid(a + b, s))

    def scale(self):
        return 1.0 + float(np.abs(self.alpha_nodes).max(initial=0.0)) + float(np.abs(self.beta_nodes).max(initial=0.0))

    def to_dict(self):
        return {"basis": "cosine", "alpha": [float(c) for c in self.alpha], "beta": [float(c) for c in self.beta]}


def make_forcing(alpha, beta, t):
    alpha = tuple(float(c) for c in np.atleast_1d(alpha))
    beta = tuple(float(c) for c in np.atleast_1d(beta))
    a = cosine_basis(t, len(alpha) - 1) @ np.asarray(alpha)
    b = cosine_basis(t, len(beta) - 1) @ np.asarray(beta)
    return Forcing(alpha, beta, a, b)


@dataclass(frozen=True)
class DiscreteState:
    u: np.ndarray
    q: float

    def sup(self):
        return float(np.abs(self.u).max(initial=0.0))


def embedding_check(state, rtol=1e-12):
    """max |u_i| <= sqrt(q) / 2, exact for the piecewise-linear interpolant."""
    return bool(state.sup() <= 0.5 * math.sqrt(state.q) * (1.0 + rtol) + 1e-300)


def make_state(problem, u):
    u = np.ascontiguousarray(u, dtype=float)
    if u.shape != (problem.n,):
        raise DomainError(f"state has shape {u.shape}, expected ({problem.n},)")
    q = kernels.dirichlet_energy(u, problem.h)
    if not q < problem.q_max:
        raise DomainError(f"q = {q!r} violates q < rho (1 - margin) = {problem.q_max!r}")
    state = DiscreteState(u, float(q))
    assert embedding_check(state), "embedding inequality failed for a piecewise-linear state"
    return state


def grid_l2(u, v, h):
    return float(math.sqrt(h * float(np.sum((u - v) ** 2))))


# --------------------------------------------------------------------------
# energy and derivatives
# --------------------------------------------------------------------------


def energy(state, problem, forcing):
    """1/2 omega~(q) - sum_i h (beta_i f~(u_i) + alpha_i u_i)."""
    if not state.q < problem.q_max:
        raise DomainError(f"q = {state.q!r} outside the admissible range")
    g_tilde = forcing.beta_nodes * problem.f_tilde(state.u) + forcing.alpha_nodes * state.u
    return 0.5 * problem.omega_tilde(state.q) - problem.h * float(np.sum(g_tilde))


def energy_gradient(state, problem, forcing):
    """omega(q) (2u_i - u_{i-1} - u_{i+1}) / h - h (beta_i f(u_i) + alpha_i)."""
    if not state.q < problem.q_max:
        raise DomainError(f"q = {state.q!r} outside the admissible range")
    h = problem.h
    w = float(problem.omega(state.q))
    return w * kernels.stiffness_apply(state.u) / h - h * (forcing.beta_nodes * problem.f(state.u) + forcing.alpha_nodes)


def residual_check(state, problem, forcing):
    """Sup-norm residual of the difference equation and the margin rho - q."""
    h = problem.h
    w = float(problem.omega(state.q))
    r = -w * kernels.stiffness_apply(state.u) / h ** 2 + forcing.beta_nodes * problem.f(state.u) + forcing.alpha_nodes
    return float(np.abs(r).max(initial=0.0)), float(problem.rho - state.q)


def _newton_step(state, problem, forcing, g):
    """Solve H s = -g for H = (w/h) A - h diag(beta f'(u)) + c (Au)(Au)^T."""
    h, u = problem.h, state.u
    w = float(problem.omega(state.q))
    dw = float(problem.omega.derivative(state.q))
    c = 2.0 * dw / h ** 2
    Au = kernels.stiffness_apply(u)
    diag = 2.0 * w / h - h * forcing.beta_nodes * np.asarray(problem.f.derivative(u), dtype=float)
    off = np.full(problem.n, -w / h)
    ab = np.vstack([off, diag, off])
    try:
        y = linalg.solve_banded((1, 1), ab, np.column_stack([-g, Au]), check_finite=False)
    except (linalg.LinAlgError, ValueError):
        y = None
    if y is not None and np.all(np.isfinite(y)):
        t_g, t_w = y[:, 0], y[:, 1]
        denom = 1.0 + c * float(Au @ t_w)
        if denom != 0.0:
            return t_g - (c * float(Au @ t_g) / denom) * t_w
    H = np.diag(diag) + np.diag(off[1:], 1) + np.diag(off[1:], -1) + c * np.outer(Au, Au)
    try:
        return np.linalg.solve(H, -g)
    except np.linalg.LinAlgError:
        return None


def _trial(problem, u):
    try:
        return make_state(problem, u)
    except DomainError:
        return None


# --------------------------------------------------------------------------
# multistart solver
# --------------------------------------------------------------------------


@dataclass
class SolveOptions:
    tol_grad: float = 1e-9
    switch_tol: float = 1e-4
    descent_iters: int = 300
    newton_iters: int = 60
    armijo: float = 1e-4


def _descend(state, problem, forcing, opts, scale):
    """Armijo descent preconditioned by (omega(q)/h) A; energy never rises."""
    h = problem.h
    E = energy(state, problem, forcing)
    for _ in range(opts.descent_iters):
        g = energy_gradient(state, problem, forcing)
        if float(np.abs(g).max()) / h < opts.switch_tol * scale:
            break
        w = max(float(problem.omega(state.q)), 1e-12)
        d = -(h / w) * _apply_inverse_stiffness(g)
        slope = float(g @ d)
        lam = 1.0
        for _ in range(40):
            trial = _trial(problem, state.u + lam * d)
            if trial is not None:
                Et = energy(trial, problem, forcing)
                if Et <= E + opts.armijo * lam * slope:
                    break
            lam *= 0.5
        else:
            break
        assert Et <= E, "energy increased along an accepted descent step"
        state, E = trial, Et
    return state


def _apply_inverse_stiffness(g):
    n = g.shape[0]
    ab = np.vstack([np.full(n, -1.0), np.full(n, 2.0), np.full(n, -1.0)])
    return linalg.solve_banded((1, 1), ab, g, check_finite=False)


def _newton(state, problem, forcing, opts, scale):
    h = problem.h
    g = energy_gradient(state, problem, forcing)
    res = float(np.abs(g).max()) / h
    for _ in range(opts.newton_iters):
        if res < opts.tol_grad * scale:
            return state
        s = _newton_step(state, problem, forcing, g)
        if s is None or not np.all(np.isfinite(s)):
            return None
        lam = 1.0
        for _ in range(40):
            trial = _trial(problem, state.u + lam * s)
            if trial is not None:
                gt = energy_gradient(trial, problem, forcing)
                rt = float(np.abs(gt).max()) / h
                if rt < res:
                    break
            lam *= 0.5
        else:
            return None
        state, g, res = trial, gt, rt
    return state if res < opts.tol_grad * scale else None


def solve_from(start, problem, forcing, opts=None):
    """Descent then Newton from one start; None when it does not converge."""
    opts = opts or SolveOptions()
    scale = forcing.scale()
    state = start if isinstance(start, DiscreteState) else make_state(problem, start)
    state = _descend(state, problem, forcing, opts, scale)
    return _newton(state, problem, forcing, opts, scale)


def _state_key(state, E, h):
    return (round(E, 10), round(h * float(state.u.sum()), 10))


def solve_multistart(problem, forcing, starts, eps_s=1e-6, opts=None):
    """Distinct critical states reached from ``starts``, sorted by energy.

    Returns a list of (state, energy) pairs, pairwise more than ``eps_s``
    apart in the grid L2 norm."""
    opts = opts or SolveOptions()
    found = []
    for k, start in enumerate(starts):
        try:
            state = solve_from(start, problem, forcing, opts)
        except (DomainError, FloatingPointError) as exc:
            log.info("start %d skipped: %s", k, exc)
            continue
        if state is None:
            log.info("start %d did not converge", k)
            continue
        if any(grid_l2(state.u, s.u, problem.h) <= eps_s for s, _ in found):
            continue
        found.append((state, energy(state, problem, forcing)))
    found.sort(key=lambda se: _state_key(se[0], se[1], problem.h))
    return found


def default_starts(problem, count=50, seed=0, modes=4, fractions=(0.3, 0.6, 0.9)):
    """u = 0, +-c sin(k pi t) for k <= ``modes`` on a small amplitude grid,
    then seeded random sine series up to ``count`` states."""
    t = problem.t
    starts = [np.zeros(problem.n)]
    for k in range(1, modes + 1):
        c_max = math.sqrt(2.0 * problem.q_max) / (k * math.pi)
        for frac in fractions:
            for sign in (1.0, -1.0):
                starts.append(sign * frac * c_max * np.sin(k * math.pi * t))
    rng = np.random.default_rng(seed)
    ks = np.arange(1, 9)
    while len(starts) < count:
        coef = rng.standard_normal(len(ks)) / ks ** 2
        u = np.sin(math.pi * np.outer(t, ks)) @ coef
        q = kernels.dirichlet_energy(u, problem.h)
        target = rng.uniform(0.02, 0.9) * problem.q_max
        starts.append(u * math.sqrt(target / q))
    return [make_state(problem, u) for u in starts[:count]]


# --------------------------------------------------------------------------
# certification
# --------------------------------------------------------------------------


def _refine(state, problem, n_new):
    coarse_t = np.concatenate(([0.0], problem.t, [1.0]))
    coarse_u = np.concatenate(([0.0], state.u, [0.0]))
    fine = problem.with_n(n_new)
    return fine, np.interp(fine.t, coarse_t, coarse_u)


def certify_classical(state, problem, forcing_fn, opts=None):
    """Re-solve at 2n+1 and 4n+3 nodes from the interpolated state.

    ``forcing_fn(t)`` builds the forcing on a grid.  The state counts as
    classical when the nested-node discrepancies shrink like h^2 (ratio at
    least 2.5) or vanish outright.
    """
    opts = opts or SolveOptions()
    chain = [(problem, state)]
    for _ in range(2):
        prob, st = chain[-1]
        fine, u0 = _refine(st, prob, 2 * prob.n + 1)
        try:
            new = solve_from(make_state(fine, u0), fine, forcing_fn(fine.t), opts)
        except DomainError:
            new = None
        if new is None:
            return {"classical": False, "reason": f"no convergence at n = {fine.n}"}
        chain.append((fine, new))
    # compare on the coarse nodes: coarse index j sits at 2j+1, then 4j+3
    idx1 = 2 * np.arange(problem.n) + 1
    idx2 = 4 * np.arange(problem.n) + 3
    d1 = float(np.abs(chain[0][1].u - chain[1][1].u[idx1]).max())
    d2 = float(np.abs(chain[1][1].u[idx1] - chain[2][1].u[idx2]).max())
    tiny = 1e-11 * (1.0 + state.sup())
    if d1 <= tiny:
        ok, ratio = True, None
    else:
        ratio = d1 / d2 if d2 > 0 else math.inf
        ok = bool(ratio >= 2.5 and d1 < 1e-2 * (1.0 + state.sup()))
    return {"classical": ok, "discrepancies": [d1, d2], "ratio": ratio}


# --------------------------------------------------------------------------
# hypotheses and the forcing search
# --------------------------------------------------------------------------


def nonconstancy_check(f, rho, n_samples=1001):
    """Is f non-constant on [-sqrt(rho)/2, sqrt(rho)/2]?  Returns (flag, pair)."""
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    a = 0.5 * math.sqrt(rho)
    xs = np.linspace(-a, a, n_samples)
    vals = np.broadcast_to(np.asarray(f(xs), dtype=float), xs.shape)
    i, j = int(np.argmin(vals)), int(np.argmax(vals))
    scale = 1.0 + float(np.abs(vals).max())
    if vals[j] - vals[i] > 1e-12 * scale:
        lo, hi = sorted((i, j))
        return True, (float(xs[lo]), float(xs[hi]))
    return False, None


def validate_problem(problem, grid_points=10_000):
    """Report on omega: nonnegative, nondecreasing, omega~ divergent at rho
    and the coercivity profile xi -> omega~(xi^2)/2 rising toward sqrt(rho).

    Divergence is judged on decade increments of omega~ at rho (1 - 10^-k),
    k = 1..6: they must not decay (last at least half the first), which
    separates logarithmic blow-up from integrable coefficients."""
    rho = problem.rho
    xs = np.linspace(0.0, rho * (1.0 - 1e-6), grid_points)
    w = np.broadcast_to(np.asarray(problem.omega(xs), dtype=float), xs.shape)
    scale = 1.0 + float(np.abs(w[np.isfinite(w)]).max(initial=0.0))
    finite = bool(np.all(np.isfinite(w)))
    nonneg = finite and bool(np.all(w >= -1e-12 * scale))
    nondecr = finite and bool(np.all(np.diff(w) >= -1e-12 * scale))
    report = {"omega nonnegative": nonneg, "omega nondecreasing": nondecr}
    try:
        levels = [antiderivative(problem.omega, rho * (1.0 - 10.0 ** -k), upper=rho) for k in range(1, 7)]
    except (DomainError, ValueError):
        levels = [math.nan] * 6
    inc = np.diff(levels)
    diverges = bool(np.all(np.isfinite(inc)) and np.all(inc > 0) and inc[-1] >= 0.5 * inc[0])
    report["omega~ diverges at rho"] = diverges
    xi = math.sqrt(rho) * np.array([0.5, 0.9, 0.99, 0.999, 1.0 - 1e-6])
    gamma = [0.5 * antiderivative(problem.omega, x * x, upper=rho) if nonneg else math.nan for x in xi]
    report["coercive toward sqrt(rho)"] = bool(diverges and np.all(np.diff(gamma) > 0))
    report["decade increments"] = [float(v) for v in inc]
    report["ok"] = all(report[k] for k in ("omega nonnegative", "omega nondecreasing",
                                           "omega~ diverges at rho", "coercive toward sqrt(rho)"))
    return report


@dataclass
class ForcingFamily:
    """Cosine polynomials of degree <= ``degree`` for alpha and beta with
    coefficients on step * Z, |c| <= coeff_bound."""

    degree: int = 0
    lattice_step: float = 1.0
    coeff_bound: float = 4.0

    def lattice(self):
        """Coefficient vectors (alpha..., beta...) ordered by L1 norm, then
        lexicographically."""
        m = int(math.floor(self.coeff_bound / self.lattice_step + 1e-9))
        dims = 2 * (self.degree + 1)
        out = []
        for shell in range(dims * m + 1):
            shell_pts = [p for p in _l1_shell(dims, shell) if max(map(abs, p), default=0) <= m]
            out.extend(sorted(shell_pts))
        return [tuple(self.lattice_step * np.asarray(p, dtype=float)) for p in out]

    def forcing(self, coeffs, t):
        d = self.degree + 1
        return make_forcing(coeffs[:d], coeffs[d:], t)

    def to_dict(self):
        return {"degree": self.degree, "lattice_step": self.lattice_step, "coeff_bound": self.coeff_bound}


def _l1_shell(dims, total):
    if dims == 1:
        return [(total,), (-total,)] if total else [(0,)]
    pts = []
    for head in range(-total, total + 1):
        for rest in _l1_shell(dims - 1, total - abs(head)):
            pts.append((head,) + rest)
    return pts


@dataclass
class SolutionPair:
    states: list
    energies: list
    forcing: Forcing
    residuals: list
    separation: float
    certification: list = field(default_factory=list)
    degree: int = 0
    tried: int = 0

    def to_dict(self, problem):
        return {
            "forcing": self.forcing.to_dict(),
            "forcing_l1_norm": self.forcing.l1_norm(),
            "degree": self.degree,
            "forcings_tried": self.tried,
            "n": problem.n,
            "states": [
                {"u": [float(x) for x in s.u], "q": s.q, "energy": float(e), "residual": float(r),
                 "max_abs": s.sup(), "certification": c}
                for s, e, r, c in zip(self.states, self.energies, self.residuals,
                                      self.certification or [None] * len(self.states))
            ],
            "separation": self.separation,
        }


def min_separation(states, h):
    pairs = itertools.combinations(states, 2)
    return min((grid_l2(a.u, b.u, h) for a, b in pairs), default=math.inf)


def verified_states(problem, forcing, found, tol_res, family=None, coeffs=None, opts=None, certify=True):
    """Keep states whose residual is below tol_res (1 + |forcing|) and, if
    asked, which certify as classical under grid refinement."""
    keep = []
    bound = tol_res * forcing.scale()
    for state, E in found:
        res, _ = residual_check(state, problem, forcing)
        if not res < bound:
            continue
        cert = None
        if certify:
            fn = (lambda t: family.forcing(coeffs, t)) if family is not None else \
                (lambda t: make_forcing(forcing.alpha, forcing.beta, t))
            cert = certify_classical(state, problem, fn, opts)
            if not cert["classical"]:
                continue
        keep.append((state, E, res, cert))
    return keep


def search_alpha_beta(problem, family, *, max_forcings=200, n_starts=30, seed=0, eps_s=1e-6,
                      tol_res=1e-8, threads=1, opts=None):
    """First forcing in the lattice with two or more verified classical states.

    Raises :class:`HypothesisError` when f is constant near 0 (no forcing can
    work) and :class:`NoWitnessFound` carrying the best candidate otherwise.
    """
    ok, _ = nonconstancy_check(problem.f, problem.rho)
    if not ok:
        raise HypothesisError("f not constant", "f is constant on [-sqrt(rho)/2, sqrt(rho)/2]; the search is futile")
    starts = default_starts(problem, n_starts, seed)
    lattice = family.lattice()[:max_forcings]
    t = problem.t

    def evaluate(coeffs):
        forcing = family.forcing(coeffs, t)
        found = solve_multistart(problem, forcing, starts, eps_s, opts)
        if len(found) < 2:
            return coeffs, forcing, []
        return coeffs, forcing, verified_states(problem, forcing, found, tol_res, family, coeffs, opts)

    best = None
    batch = max(1, int(threads))
    with ThreadPoolExecutor(max_workers=batch) as pool:
        for i in range(0, len(lattice), batch):
            # results come back in lattice order, so the merge is deterministic
            for k, (coeffs, forcing, kept) in enumerate(pool.map(evaluate, lattice[i:i + batch])):
                if best is None or len(kept) > len(best[2]):
                    best = (coeffs, forcing, kept)
                if len(kept) >= 2:
                    states = [s for s, *_ in kept]
                    return SolutionPair(states, [e for _, e, _, _ in kept], forcing,
                                        [r for _, _, r, _ in kept], min_separation(states, problem.h),
                                        [c for *_, c in kept], family.degree, i + k + 1)
    info = None if best is None else {"forcing": best[1].to_dict(), "states": len(best[2])}
    raise NoWitnessFound(f"no forcing with two verified states among {len(lattice)} lattice points", best=info)


def uniqueness_probe(problem, forcings, starts_per_forcing=50, seed=0, eps_s=1e-6, opts=None, n_pairs=20):
    """For constant f, check that every start lands on one state per forcing
    and spot-check midpoint strict convexity of the energy."""
    ok, _ = nonconstancy_check(problem.f, problem.rho)
    if ok:
        raise HypothesisError("f constant", "uniqueness probe needs a constant reaction term")
    starts = default_starts(problem, starts_per_forcing, seed)
    rng = np.random.default_rng(seed)
    rows = []
    for forcing in forcings:
        reached = []
        for start in starts:
            state = solve_from(start, problem, forcing, opts)
            if state is not None:
                reached.append(state.u)
        U = np.array(reached)
        labels = kernels.cluster_labels(U * math.sqrt(problem.h), eps_s) if len(U) else np.zeros(0, int)
        spread = float(np.abs(U - U[0]).max()) if len(U) else math.nan
        convex_ok = True
        for _ in range(n_pairs):
            a, b = rng.choice(len(starts), 2, replace=False)
            u, v = starts[a], starts[b]
            mid = make_state(problem, 0.5 * (u.u + v.u))
            lhs = energy(mid, problem, forcing)
            rhs = 0.5 * (energy(u, problem, forcing) + energy(v, problem, forcing))
            convex_ok &= bool(lhs < rhs)
        rows.append({
            "forcing": forcing.to_dict(),
            "converged": len(reached),
            "clusters": int(labels.max() + 1) if len(labels) else 0,
            "spread": spread,
            "midpoint_convex": convex_ok,
        })
    violations = [r for r in rows if r["clusters"] != 1 or not r["midpoint_convex"]]
    return {"forcings": rows, "violations": len(violations), "max_spread": max((r["spread"] for r in rows), default=0.0)}


def random_forcings(rng, t, count, degree=2, bound=2.0):
    out = []
    for _ in range(count):
        a = rng.uniform(-bound, bound, degree + 1)
        b = rng.uniform(-bound, bound, degree + 1)
        out.append(make_forcing(np.round(a, 6), np.round(b, 6), t))
    return out


def symmetric_closed(states, h, eps_s=1e-6):
    """Is the state set closed under u -> -u?"""
    return all(any(grid_l2(-s.u, o.u, h) <= eps_s for o in states) for s in states)


def write_state_csv(path, problem, state):
    t = np.concatenate(([0.0], problem.t, [1.0]))
    u = np.concatenate(([0.0], state.u, [0.0]))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "u"])
        for a, b in zip(t, u):
            w.writerow([repr(float(a)), repr(float(b))])


def eigen_state(problem, amplitude=1.0 / math.pi):
    """amplitude * sin(pi t) at the interior nodes."""
    return make_state(problem, amplitude * np.sin(math.pi * problem.t))
