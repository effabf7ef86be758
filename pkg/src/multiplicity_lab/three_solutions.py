"""Three solutions of x + I'(x) + mu J'(x) = y on R^n.

Covers the explicit radius constant for the (y, mu) ball, a lattice search
for (y0, mu0) inside it, deflated Newton enumeration of roots, and a 1-D
bisection oracle for the scalar equation x + a J'(x) = b.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import HypothesisError, NoWitnessFound
from .functions import Functional, ScalarFunction, fd_step
from .sampling import sup_over_ball

log = logging.getLogger(__name__)

_GRID_PER_AXIS = {1: 4001, 2: 201, 3: 41}


def box_grid(dim, radius, per_axis=None, extra=()):
    per_axis = per_axis or _GRID_PER_AXIS.get(dim, 21)
    axis = np.linspace(-radius, radius, per_axis)
    grids = np.meshgrid(*([axis] * dim), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    if len(extra):
        pts = np.vstack([pts, np.asarray(extra, dtype=float).reshape(-1, dim)])
    return pts


def _polished_min(fn_batch, grid, radius, n_starts=3):
    """Grid minimum refined by bounded L-BFGS from the best grid nodes."""
    vals = fn_batch(grid)
    best = float(vals.min())
    dim = grid.shape[1]
    bounds = [(-radius, radius)] * dim
    for i in np.argsort(vals, kind="stable")[:n_starts]:
        res = optimize.minimize(lambda x: float(fn_batch(x[None, :])[0]), grid[i], method="L-BFGS-B",
                                bounds=bounds, options={"ftol": 1e-15, "gtol": 1e-12})
        if res.fun < best:
            best = float(res.fun)
    return best


@dataclass
class RadiusBound:
    value: float
    numerator: float
    denominator: float
    parts: dict
    r_cut: float
    sensitivity: float
    hypotheses: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "value": self.value,
            "numerator": self.numerator,
            "denominator": self.denominator,
            "parts": self.parts,
            "r_cut": self.r_cut,
            "r_cut_sensitivity": self.sensitivity,
            "hypotheses": self.hypotheses,
        }


def _sup_abs(fn_batch, dim, radius):
    return float(np.abs(fn_batch(box_grid(dim, radius))).max())


def default_r_cut(J, x_hat):
    """3 (|x_hat| + sup |J|), sup taken on a box of radius 3 (|x_hat| + 1)."""
    x_hat = np.asarray(x_hat, dtype=float)
    nrm = float(np.linalg.norm(x_hat))
    sup_j = _sup_abs(J.value_batch, J.dim, 3.0 * (nrm + 1.0))
    return 3.0 * (nrm + sup_j)


def check_hypotheses(I, J, x_hat, r_cut, tol=1e-9):
    x_hat = np.asarray(x_hat, dtype=float)
    j0 = J(np.zeros(J.dim))
    jh = J(x_hat)
    jmh = J(-x_hat)
    checks = {
        "J(0) != 0": bool(abs(j0) > tol * (1 + abs(j0))),
        "J(-x_hat) = -J(x_hat)": bool(abs(jmh + jh) <= tol * (1 + abs(jh))),
    }
    phi = lambda X: 2 * I.value_batch(X) - J.value_batch(X) ** 2  # noqa: E731
    near = phi(box_grid(J.dim, r_cut))
    far = phi(box_grid(J.dim, 2 * r_cut))
    osc_near = float(near.max() - near.min()) if np.all(np.isfinite(near)) else math.inf
    osc_far = float(far.max() - far.min()) if np.all(np.isfinite(far)) else math.inf
    checks["2I - J^2 bounded"] = bool(math.isfinite(osc_far) and osc_far <= 10 * (1 + osc_near))
    checks["J not affine"] = bool(graph_nonconvex(J, r_cut))
    return checks


def _bound_at(I, J, x_hat, R):
    dim = J.dim
    x_hat = np.asarray(x_hat, dtype=float)
    grid = box_grid(dim, R, extra=[x_hat, -x_hat, np.zeros(dim)])
    sq = lambda X: np.einsum("ij,ij->i", X, X) + J.value_batch(X) ** 2  # noqa: E731
    phi = lambda X: 2 * I.value_batch(X) - J.value_batch(X) ** 2  # noqa: E731
    inf_sq = _polished_min(sq, grid, R)
    sup_phi = -_polished_min(lambda X: -phi(X), grid, R)
    inf_phi = _polished_min(phi, grid, R)
    anchor = float(x_hat @ x_hat + J(x_hat) ** 2)
    numerator = anchor - inf_sq + sup_phi - inf_phi
    denominator = 2.0 * math.sqrt(inf_sq)
    parts = {
        "anchor": anchor,
        "inf_norm_sq": inf_sq,
        "sup_phi": sup_phi,
        "inf_phi": inf_phi,
    }
    return numerator / denominator, numerator, denominator, parts


def three_solution_radius_bound(I, J, x_hat, r_cut=None):
    """Right-hand side of the admissible radius inequality for the (y, mu) ball:

        (|x^|^2 + J(x^)^2 - inf |x|^2 + J^2 + sup (2I - J^2) - inf (2I - J^2))
        / (2 inf sqrt(|x|^2 + J^2))

    with all extrema over a coercivity truncation |x_i| <= r_cut.  The
    result is recomputed at 2 r_cut and the difference reported as the
    truncation sensitivity.  Raises :class:`HypothesisError` if J(0) = 0,
    J is not odd at x_hat, or 2I - J^2 grows with the truncation.
    """
    if r_cut is None:
        r_cut = default_r_cut(J, x_hat)
    checks = check_hypotheses(I, J, x_hat, r_cut)
    for name in ("J(0) != 0", "J(-x_hat) = -J(x_hat)", "2I - J^2 bounded"):
        if not checks[name]:
            raise HypothesisError(name, "hypothesis of the radius bound fails")
    value, num, den, parts = _bound_at(I, J, x_hat, r_cut)
    value2, *_ = _bound_at(I, J, x_hat, 2 * r_cut)
    return RadiusBound(float(value), float(num), float(den), parts, float(r_cut),
                       float(abs(value2 - value)), checks)


def graph_rho_r(J, r, r_cut, x_hat=None, budget=1.0, seed=0):
    """Estimate sup_{|(y, mu)| < r} inf_x |x|^2 + J(x)^2 - 2<x, y> - 2 mu J(x)
    over the truncated grid."""
    dim = J.dim
    extra = [] if x_hat is None else [np.asarray(x_hat, float), -np.asarray(x_hat, float)]
    grid = box_grid(dim, r_cut, extra=extra)
    jv = J.value_batch(grid)
    base = np.einsum("ij,ij->i", grid, grid) + jv ** 2
    lifted = np.column_stack([grid, jv])

    def fn(Y):
        return (base[None, :] - 2.0 * Y @ lifted.T).min(axis=1)

    value, _ = sup_over_ball(fn, dim + 1, r, seed=seed, budget_scale=budget)
    return float(value)


def graph_nonconvex(J, r_cut, n_pairs=2000, seed=0, tol=1e-9):
    """Midpoint test on the graph of J: non-convex unless J is affine."""
    rng = np.random.default_rng(seed)
    a = rng.uniform(-r_cut, r_cut, size=(n_pairs, J.dim))
    b = rng.uniform(-r_cut, r_cut, size=(n_pairs, J.dim))
    gap = J.value_batch(0.5 * (a + b)) - 0.5 * (J.value_batch(a) + J.value_batch(b))
    scale = 1.0 + float(np.abs(J.value_batch(a)).max())
    return bool(np.abs(gap).max() > tol * scale)


# --------------------------------------------------------------------------
# deflated Newton
# --------------------------------------------------------------------------


def fd_jacobian(F, x):
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    J = np.empty((len(F(x)), n))
    for c in range(n):
        h = float(fd_step(x[c]))
        e = np.zeros(n)
        e[c] = h
        J[:, c] = (F(x + e) - F(x - e)) / (2 * h)
    return J


def _deflation(x, roots):
    """M(x) = prod_j (1 / |x - x_j|^2 + 1) and its gradient."""
    m = 1.0
    g = np.zeros_like(x)
    for z in roots:
        d = x - z
        d2 = float(d @ d)
        if d2 == 0.0:
            return math.inf, g
        mj = 1.0 / d2 + 1.0
        m *= mj
        g += (-2.0 * d / d2 ** 2) / mj
    return m, m * g


def _multiplier(x, roots):
    # M(x) alone, for the line search
    m = 1.0
    for z in roots:
        d = x - z
        d2 = float(d @ d)
        if d2 == 0.0:
            return math.inf
        m *= 1.0 / d2 + 1.0
    return m


def _newton_deflated(F, jac, x, roots, tol, max_iter):
    for _ in range(max_iter):
        fx = F(x)
        nf = float(np.linalg.norm(fx))
        if nf < tol:
            return x
        m, gm = _deflation(x, roots)
        if not math.isfinite(m):
            return None
        JG = m * jac(x) + np.outer(fx, gm)
        step = np.linalg.solve(JG, -m * fx)
        if not np.all(np.isfinite(step)):
            raise np.linalg.LinAlgError("non-finite Newton step")
        merit = m * nf
        lam = 1.0
        for _ in range(30):
            trial = x + lam * step
            mt = _multiplier(trial, roots)
            if math.isfinite(mt) and mt * float(np.linalg.norm(F(trial))) < merit:
                break
            lam *= 0.5
        else:
            return None  # no descent direction for the deflated merit
        x = x + lam * step
        if float(np.linalg.norm(lam * step)) < 1e-15 * (1.0 + float(np.linalg.norm(x))):
            return x
        if float(np.linalg.norm(x)) > 1e8:
            return None
    return x


def _polish(F, jac, x, steps=6):
    for _ in range(steps):
        fx = F(x)
        if float(np.linalg.norm(fx)) == 0.0:
            break
        try:
            dx = np.linalg.solve(jac(x), -fx)
        except np.linalg.LinAlgError:
            break
        trial = x + dx
        if float(np.linalg.norm(F(trial))) >= float(np.linalg.norm(fx)):
            break
        x = trial
    return x


def solve_deflated(F, starts, tol_root=1e-10, eps_s=1e-6, jac=None, max_iter=100):
    """Distinct roots of F: R^n -> R^n by deflated damped Newton.

    Each start runs Newton on M(x) F(x), where M deflates every root found
    so far; converged points are polished on F itself.  Returns roots with
    |F| < tol_root, pairwise more than eps_s apart, sorted lexicographically.
    """
    if jac is None:
        jac = lambda x: fd_jacobian(F, x)  # noqa: E731
    roots = []
    for x0 in starts:
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        try:
            x = _newton_deflated(F, jac, x0.copy(), roots, 0.01 * tol_root, max_iter)
        except np.linalg.LinAlgError:
            log.info("deflated Newton: Jacobian breakdown from start %s, skipped", x0.tolist())
            continue
        if x is None:
            continue
        x = _polish(F, jac, x)
        if not float(np.linalg.norm(F(x))) < tol_root:
            continue
        if any(float(np.linalg.norm(x - z)) <= eps_s for z in roots):
            continue
        roots.append(x)
    roots.sort(key=lambda z: tuple(z))
    return roots


# --------------------------------------------------------------------------
# the scalar equation x + a J'(x) = b
# --------------------------------------------------------------------------


def scalar_derivative(J):
    """Vectorised J' for a 1-D :class:`Functional` or a :class:`ScalarFunction`."""
    if isinstance(J, Functional):
        return lambda x: J.grad(np.asarray(x, dtype=float).reshape(-1, 1))[:, 0]
    if isinstance(J, ScalarFunction):
        return lambda x: np.asarray(J.derivative(np.asarray(x, dtype=float)), dtype=float)
    return J


@dataclass
class ScalarRoots:
    roots: list
    interval: tuple

    @property
    def count(self):
        return len(self.roots)


def scalar_three_roots(J, a, b, interval=None, n_brackets=4000, derivative_bound=None):
    """All sign-change roots of x + a J'(x) - b by bisection.

    The default interval |x| <= |b| + |a| sup|J'| + 1 contains every root;
    ``sup|J'|`` is estimated on a wide grid unless ``derivative_bound`` is
    given.
    """
    dJ = scalar_derivative(J)
    if interval is None:
        if derivative_bound is None:
            derivative_bound = float(np.abs(dJ(np.linspace(-1e3, 1e3, 200_001))).max())
        R = abs(b) + abs(a) * derivative_bound + 1.0
        interval = (-R, R)
    g = lambda x: x + a * dJ(x) - b  # noqa: E731
    xs = np.linspace(interval[0], interval[1], n_brackets + 1)
    gv = g(xs)
    roots = [float(x) for x, v in zip(xs, gv) if v == 0.0]
    idx = np.flatnonzero(gv[:-1] * gv[1:] < 0)
    for i in idx:
        r = optimize.bisect(lambda x: float(g(np.array([x]))[0]), xs[i], xs[i + 1],
                            xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
        roots.append(float(r))
    return ScalarRoots(sorted(roots), (float(interval[0]), float(interval[1])))


# --------------------------------------------------------------------------
# witness search
# --------------------------------------------------------------------------


@dataclass
class ThreeSolutionWitness:
    y0: np.ndarray
    mu0: float
    roots: list
    residuals: list
    radius_bound: float
    hypotheses: dict = field(default_factory=dict)

    @property
    def norm(self):
        return math.hypot(float(np.linalg.norm(self.y0)), self.mu0)

    def to_dict(self):
        return {
            "y0": [float(c) for c in self.y0],
            "mu0": float(self.mu0),
            "roots": [[float(c) for c in z] for z in self.roots],
            "residuals": [float(r) for r in self.residuals],
            "radius_bound": float(self.radius_bound),
            "hypotheses": self.hypotheses,
        }


def equation(I, J, y0, mu0):
    """F(x) = x + I'(x) + mu0 J'(x) - y0 on R^n."""
    y0 = np.asarray(y0, dtype=float)

    def F(x):
        x = np.asarray(x, dtype=float)
        return x + I.grad(x) + mu0 * J.grad(x) - y0

    return F


def _hessian_min_eig(fn_grad, grid):
    dim = grid.shape[1]
    H = np.empty((len(grid), dim, dim))
    for c in range(dim):
        h = fd_step(grid[:, c])[:, None]
        e = np.zeros_like(grid)
        e[:, c] = h[:, 0]
        H[:, :, c] = (fn_grad(grid + e) - fn_grad(grid - e)) / (2 * h)
    H = 0.5 * (H + np.transpose(H, (0, 2, 1)))
    return np.linalg.eigvalsh(H)[:, 0]


def convexity_screen(I, J, mu, grid):
    """Smallest Hessian eigenvalue of |x|^2/2 + I + mu J on the grid.

    When it is positive the equation is the critical-point equation of a
    strictly convex functional and has a single solution, so the candidate
    can be skipped without running Newton."""
    grad = lambda X: X + I.grad(X) + mu * J.grad(X)  # noqa: E731
    return float(_hessian_min_eig(grad, grid).min())


def candidate_lattice(dim, r, spacing):
    """(y0, mu0) lattice points with |(y0, mu0)| <= r - spacing, ordered by
    norm then lexicographically."""
    reach = r - spacing
    m = int(math.floor(reach / spacing + 1e-9))
    axis = spacing * np.arange(-m, m + 1)
    grids = np.meshgrid(*([axis] * (dim + 1)), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    norms = np.linalg.norm(pts, axis=1)
    pts, norms = pts[norms <= reach + 1e-12], norms[norms <= reach + 1e-12]
    keys = [pts[:, c] for c in range(dim, -1, -1)] + [np.round(norms, 12)]
    return pts[np.lexsort(keys)]


def start_grid(dim, radius, per_axis=None):
    per_axis = per_axis or {1: 41, 2: 13, 3: 7}.get(dim, 5)
    return box_grid(dim, radius, per_axis)


def find_three_solutions(I, J, r, *, spacing=0.1, tol_root=1e-10, eps_s=1e-6, r_cut=None,
                         max_candidates=None, radius_bound=None, hypotheses=None):
    """First lattice (y0, mu0) in the ball of radius r (ordered by norm) for
    which deflated Newton finds three or more solutions of
    x + I'(x) + mu0 J'(x) = y0.  Candidates whose associated functional is
    strictly convex on the truncation box are skipped."""
    dim = J.dim
    if r_cut is None:
        r_cut = 3.0 * (1.0 + _sup_abs(J.value_batch, dim, 10.0))
    screen_grid = box_grid(dim, r_cut, {1: 2001, 2: 81, 3: 21}.get(dim, 9))
    g_i = float(np.linalg.norm(I.grad(screen_grid), axis=1).max())
    g_j = float(np.linalg.norm(J.grad(screen_grid), axis=1).max())
    convex_cache = {}
    tried = 0
    for cand in candidate_lattice(dim, r, spacing):
        y0, mu0 = cand[:dim], float(cand[dim])
        if max_candidates is not None and tried >= max_candidates:
            break
        key = round(mu0, 12)
        if key not in convex_cache:
            convex_cache[key] = convexity_screen(I, J, mu0, screen_grid) > 0
        if convex_cache[key]:
            continue
        tried += 1
        F = equation(I, J, y0, mu0)
        jac = _jacobian_for(I, J, mu0)
        box = float(np.linalg.norm(y0)) + g_i + abs(mu0) * g_j + 0.5
        roots = solve_deflated(F, start_grid(dim, box), tol_root, eps_s, jac=jac)
        if len(roots) >= 3:
            residuals = [float(np.linalg.norm(F(z))) for z in roots]
            return ThreeSolutionWitness(y0.copy(), mu0, roots, residuals,
                                        float(r if radius_bound is None else radius_bound),
                                        dict(hypotheses or {}))
    raise NoWitnessFound(f"no (y0, mu0) lattice point with three solutions among {tried} candidates")


def _jacobian_for(I, J, mu0):
    def jac(x):
        x = np.asarray(x, dtype=float)
        G = lambda z: z + I.grad(z) + mu0 * J.grad(z)  # noqa: E731
        return fd_jacobian(G, x)

    return jac
