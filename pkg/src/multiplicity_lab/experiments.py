"""Config-driven experiments: build inputs from JSON, run, report, re-verify.

A config is ``{"name", "kind", "task", "seed", "description", "params"}``.
``run_config`` returns a report dict whose witnesses ``verify_report`` can
recheck with the brute-force oracles alone.
"""

import copy
import json
import logging
import math
from importlib import resources

import numpy as np
import sympy as sp

from . import __version__, chebyshev, kernels, kirchhoff, minimax, three_solutions
from .errors import ConfigError, HypothesisError, LabError, NoWitnessFound
from .functions import coefficient, functional, reaction
from .hilbert import Perturbation, as_point, circle, parametric_curve, point_cloud

log = logging.getLogger(__name__)

KINDS = ("chebyshev", "minimax", "three-solutions", "kirchhoff", "validate")


# --------------------------------------------------------------------------
# config plumbing
# --------------------------------------------------------------------------


def bundled_names():
    root = resources.files("multiplicity_lab") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_config(ref):
    """A config from a file path or a bundled name."""
    root = resources.files("multiplicity_lab") / "configs"
    candidate = root / f"{ref}.json"
    try:
        if candidate.is_file():
            text = candidate.read_text()
        else:
            with open(ref) as fh:
                text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {ref!r}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {ref!r} is not valid JSON: {exc}") from exc
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    if not isinstance(cfg, dict) or not cfg:
        raise ConfigError("config must be a non-empty object")
    for key in ("name", "kind", "params"):
        if key not in cfg:
            raise ConfigError(f"config is missing {key!r}")
    if cfg["kind"] not in KINDS:
        raise ConfigError(f"unknown kind {cfg['kind']!r}; expected one of {', '.join(KINDS)}")
    if not isinstance(cfg["params"], dict):
        raise ConfigError("params must be an object")
    if not isinstance(cfg.get("seed", 0), int):
        raise ConfigError("seed must be an integer")
    if (cfg["kind"], cfg.get("task")) not in RUNNERS:
        raise ConfigError(f"no runner for kind {cfg['kind']!r} with task {cfg.get('task')!r}")


def num(v):
    """A float from a number or an expression string such as '2*pi**2'."""
    if isinstance(v, (int, float)):
        return float(v)
    try:
        return float(sp.sympify(v))
    except (sp.SympifyError, TypeError, ValueError) as exc:
        raise ConfigError(f"cannot read number {v!r}") from exc


def nums(vs):
    return [num(v) for v in vs]


def build_set(spec):
    kind = spec.get("type")
    if kind == "points":
        return point_cloud(np.asarray(spec["points"], dtype=float), spec.get("provenance", "points"))
    if kind == "circle":
        return circle(int(spec["n"]), num(spec.get("radius", 1.0)), nums(spec.get("center", [0.0, 0.0])))
    if kind == "interval":
        a, b = nums(spec["range"])
        n = int(spec["n"])
        params = np.linspace(a, b, n, endpoint=bool(spec.get("endpoint", True)))
        return parametric_curve(lambda t: t[:, None], params, f"interval[{a}, {b}]")
    if kind == "curve":
        a, b = nums(spec["range"])
        n = int(spec["n"])
        closed = bool(spec.get("closed", False))
        params = np.linspace(a, b, n, endpoint=not closed)
        fn = build_map(spec["coords"], 1, var="t")
        return parametric_curve(lambda t: fn(t[:, None]), params, f"curve{tuple(spec['coords'])}", closed)
    raise ConfigError(f"unknown set type {kind!r}")


def build_map(exprs, dim, var="x"):
    """A vectorised map R^dim -> R^m from expression strings in x0.. (or t)."""
    if exprs is None:
        return None
    syms = [sp.Symbol("t")] if var == "t" else list(sp.symbols(f"x0:{dim}"))
    fns = []
    for e in exprs:
        try:
            fns.append(sp.lambdify(syms, sp.sympify(e, locals={str(s): s for s in syms}), "numpy"))
        except (sp.SympifyError, TypeError) as exc:
            raise ConfigError(f"cannot parse map component {e!r}") from exc

    def fn(X):
        X = np.asarray(X, dtype=float)
        cols = [np.broadcast_to(np.asarray(f(*X.T), dtype=float), (X.shape[0],)) for f in fns]
        return np.column_stack(cols)

    return fn


def build_values(spec, X, default="0"):
    spec = default if spec is None else spec
    if isinstance(spec, dict) and "values" in spec:
        vals = np.asarray(nums(spec["values"]), dtype=float)
        if vals.shape[0] != len(X):
            raise ConfigError(f"{vals.shape[0]} values given for {len(X)} samples")
        return vals
    text = spec["expr"] if isinstance(spec, dict) else spec
    return functional(text, X.dim).value_batch(X.samples)


def build_problem(p):
    return kirchhoff.KirchhoffProblem(
        reaction(p.get("f", "identity")),
        coefficient(p.get("omega", "reciprocal"), num(p.get("rho", 1.0))),
        num(p.get("rho", 1.0)),
        int(p.get("n", 200)),
        num(p.get("margin", 1e-3)),
    )


def build_forcing(spec, t):
    return kirchhoff.make_forcing(nums(spec.get("alpha", [0.0])), nums(spec.get("beta", [0.0])), t)


def clean(obj):
    """JSON-safe copy: numpy scalars and arrays to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def dumps(report):
    return json.dumps(clean(report), sort_keys=True, indent=1, allow_nan=False) + "\n"


class Outcome:
    """Accumulates results, witnesses, checks and warnings for one run."""

    def __init__(self):
        self.results = {}
        self.witnesses = []
        self.checks = {}
        self.warnings = []
        self.artifacts = {}

    def check(self, name, ok):
        self.checks[name] = bool(ok)

    def warn(self, msg):
        log.warning(msg)
        self.warnings.append(msg)


# --------------------------------------------------------------------------
# chebyshev
# --------------------------------------------------------------------------


def _chebyshev_inputs(p):
    X = build_set(p["set"])
    psi = build_map(p.get("psi"), X.dim)
    images = X.samples if psi is None else psi(X.samples)
    Y = X if psi is None else point_cloud(images, "psi(X)")
    phi = Perturbation(build_values(p.get("phi"), X))
    u0 = as_point(nums(p["u0"]), images.shape[1])
    return X, psi, Y, phi, u0


def run_chebyshev(cfg, out, budget, threads):
    p = cfg["params"]
    seed = cfg.get("seed", 0)
    X, psi, Y, phi, u0 = _chebyshev_inputs(p)
    grid = p.get("r_grid", {"geometric": [0.01, 1.0, 9]})
    r_grid = chebyshev.geometric_grid(*nums(grid["geometric"][:2]), int(grid["geometric"][2])) \
        if "geometric" in grid else np.asarray(nums(grid["values"]))
    certs = chebyshev.admissible_r_scan(u0, Y, phi, r_grid, budget, seed)
    out.results["certificates"] = [c.to_dict() for c in certs]
    out.results["thresholds"] = [c.threshold for c in certs]
    if "rho_radii" in p:
        out.results["rho_r"] = [{"r": r, "rho_r": chebyshev.rho_r(u0, Y, r, budget, seed)} for r in nums(p["rho_radii"])]
    for r in out.results.get("rho_r", []):
        d = certs[0].delta
        out.check(f"rho_r envelope at r={r['r']}", d * d - 1e-12 <= r["rho_r"] <= d * d + 2 * d * r["r"] + 1e-12)
    nc = chebyshev.check_nonconvex(Y.samples, chebyshev.image_resolution(psi, X, Y.samples), seed=seed)
    out.results["nonconvex"] = {"flag": nc.nonconvex, "distance": nc.distance, "threshold": nc.threshold}
    expect = p.get("expect", {})
    if "threshold" in expect:
        worst = max(abs(t - num(expect["threshold"])) for t in out.results["thresholds"])
        out.check("admissibility threshold", worst <= 1e-12)
    r_search = num(p["search_radius"])
    (cert,) = chebyshev.admissible_r_scan(u0, Y, phi, [r_search], budget, seed)
    out.results["search_certificate"] = cert.to_dict()
    if not cert.admissible:
        out.warn(f"search radius {r_search} is not admissible; no search run")
        return
    try:
        w = chebyshev.find_double_minimum(u0, psi, X, phi, cert, budget=budget, seed=seed)
    except NoWitnessFound as exc:
        out.warn(f"double-minimum search exhausted: {exc}")
        return
    ver = chebyshev.verify_double_minimum(w.y0, psi, X, phi)
    wd = w.to_dict()
    wd.update({"type": "double-minimum", "verified": ver.ok, "n_clusters": ver.n_clusters})
    out.witnesses.append(wd)
    out.check("witness verified by brute force", ver.ok)
    out.check("witness inside the open ball", float(np.linalg.norm(w.y0 - u0)) < r_search)
    recomputed = chebyshev.certificate_margin(r_search, cert.delta, cert.rho_r, phi.hi - phi.lo)
    out.check("radius condition holds at the witness radius", recomputed > 0)
    if "y0" in expect:
        out.check("witness location", float(np.linalg.norm(w.y0 - np.asarray(nums(expect["y0"])))) <= num(expect.get("y0_tol", 1e-6)))
    if "min_clusters" in expect:
        out.check("cluster count", ver.n_clusters >= int(expect["min_clusters"]))


# --------------------------------------------------------------------------
# minimax
# --------------------------------------------------------------------------


def _axis(spec):
    if "points" in spec:
        return np.asarray(nums(spec["points"]))
    a, b = nums(spec["range"])
    return np.linspace(a, b, int(spec["n"]))


def _two_var(expr):
    x, y = sp.symbols("x y")
    try:
        return sp.lambdify((x, y), sp.sympify(expr, locals={"x": x, "y": y}), "numpy")
    except (sp.SympifyError, TypeError) as exc:
        raise ConfigError(f"cannot parse {expr!r}") from exc


def gap_on_grid(expr, grid):
    xs, ys = _axis(grid["x"]), _axis(grid["y"])
    return minimax.minimax_gap(minimax.tabulate(_two_var(expr), xs, ys), f"{len(xs)}x{len(ys)}")


def run_gap(cfg, out, budget, threads):
    for case in cfg["params"]["cases"]:
        est = [gap_on_grid(case["f"], g) for g in case["grids"]]
        label = case.get("label", case["f"])
        rows = [e.to_dict() for e in est]
        out.results[label] = rows
        out.witnesses.append({"type": "gap", "f": case["f"], "grids": case["grids"], "estimates": rows})
        out.check(f"{label}: weak duality", all(e.gap >= -1e-10 for e in est))
        if case.get("expect"):
            for e, want in zip(est, case["expect"]):
                if want is None:
                    continue
                out.check(f"{label} {e.grids}: sup-inf and inf-sup",
                          abs(e.sup_inf - num(want["sup_inf"])) <= 1e-12 and abs(e.inf_sup - num(want["inf_sup"])) <= 1e-12)
        if case.get("gap_below") is not None:
            out.check(f"{label}: gap below {case['gap_below']}", est[0].gap < num(case["gap_below"]))
        if case.get("nonincreasing"):
            out.check(f"{label}: gap does not grow under refinement",
                      all(b.gap <= a.gap + 1e-12 for a, b in zip(est, est[1:])))
        if case.get("check_hypotheses"):
            g = case["grids"][0]
            hyp = minimax.check_minimax_hypotheses(_two_var(case["f"]), _axis(g["x"]), _axis(g["y"]),
                                                   seed=cfg.get("seed", 0))
            out.results[f"{label} hypotheses"] = {"unique_minimum": hyp.unique_minimum,
                                                  "quasi_concave": hyp.quasi_concave,
                                                  "worst_quasi_concavity": hyp.worst_quasi_concavity}
            out.check(f"{label}: minimax hypotheses hold on the grid", hyp.ok)


def sup_inf_suite(instances, eta_samples, seed, n_max=3, max_points=5):
    rng = np.random.default_rng(seed)
    violations = 0
    tightest = math.inf
    for _ in range(instances):
        X, vals, images, xs, w, n = minimax.random_sup_inf_instance(rng, n_max, 12, max_points)
        etas = rng.normal(scale=3.0, size=(eta_samples, n))
        rep = minimax.check_sup_inf_bound(vals, lambda s, im=images: im, xs, w, etas, X)
        violations += rep.violations
        tightest = min(tightest, rep.tightest_slack)
    return {"instances": instances, "eta_samples": eta_samples, "violations": violations, "tightest_slack": tightest}


def run_sup_inf(cfg, out, budget, threads):
    p = cfg["params"]
    res = sup_inf_suite(int(p.get("instances", 1000)), int(p.get("eta_samples", 100)), cfg.get("seed", 0),
                       int(p.get("n_max", 3)), int(p.get("max_points", 5)))
    out.results["suite"] = res
    out.check("no violations of the sup-inf upper bound", res["violations"] == 0)
    for case in p.get("cases", []):
        X = build_set(case["set"])
        vals = build_values(case.get("I"), X)
        rep = minimax.check_sup_inf_bound(vals, None, case["xs"], nums(case["weights"]),
                                   np.asarray([nums(e) for e in case["etas"]]), X)
        out.results[case["label"]] = {"max_I": rep.max_I, "tightest_slack": rep.tightest_slack,
                                      "violations": rep.violations}
        out.check(f"{case['label']}: bound holds", rep.ok)


def run_ball_condition(cfg, out, budget, threads):
    p = cfg["params"]
    seed = cfg.get("seed", 0)
    X, psi, Y, phi, u0 = _chebyshev_inputs(p)
    vals = build_values(p.get("I"), X)
    r = num(p["r"])
    rep = minimax.ball_condition_margin(vals, psi, phi, u0, r, X, budget, seed)
    bridge = minimax.minimax_bridge(vals, psi, phi, u0, r, X, budget, seed)
    out.results["ball_condition"] = rep.to_dict()
    out.results["bridge"] = {"sup_inf": bridge.sup_inf, "inf_sup": bridge.inf_sup, "strict": bridge.strict}
    if "margin" in p.get("expect", {}):
        out.check("margin value", abs(rep.margin - num(p["expect"]["margin"])) <= 1e-9)
    if rep.margin > 0:
        out.check("positive margin gives a strict minimax inequality", bridge.strict)
    # the nearest-point radius condition, rewritten as a ball margin condition
    I8, phi8 = minimax.nearest_point_instance(u0, psi, X, phi)
    rep8 = minimax.ball_condition_margin(I8, psi, phi8, u0, r, X, budget, seed)
    (cert,) = chebyshev.admissible_r_scan(u0, Y, phi, [r], budget, seed)
    out.results["nearest_point_condition"] = {"ball_margin": rep8.margin, "radius_margin": cert.margin}
    out.check("both certificates agree in sign", (rep8.margin > 0) == (cert.margin > 0))
    out.witnesses.append({"type": "ball-condition", "first_term": rep.inf_sup_term, "margin": rep.margin,
                          "second_term": rep.sup_inf_term, "osc_phi": rep.osc_phi})


def run_eta(cfg, out, budget, threads):
    p = cfg["params"]
    X = build_set(p["set"])
    psi = build_map(p.get("psi"), X.dim)
    for case in p["cases"]:
        vals = build_values(case["I"], X)
        try:
            w = minimax.find_eta_two_minima(vals, psi, X, bound=num(p.get("bound", 2.0)),
                                            spacing=num(p.get("spacing", 0.25)), seed=cfg.get("seed", 0))
        except NoWitnessFound as exc:
            out.warn(f"I = {case['I']}: {exc}")
            continue
        wd = w.to_dict()
        wd.update({"type": "eta-two-minima", "I": case["I"]})
        out.witnesses.append(wd)
        ok = count_eta_clusters(cfg, case["I"], w.eta) >= 2
        out.check(f"I = {case['I']}: two minima verified", ok)
        if "expect_eta" in case:
            out.check(f"I = {case['I']}: eta value",
                      float(np.linalg.norm(w.eta - np.asarray(nums(case["expect_eta"])))) <= 1e-9)


def count_eta_clusters(cfg, I_spec, eta):
    """Brute-force cluster count of I + eta(psi) over the whole set."""
    p = cfg["params"]
    X = build_set(p["set"])
    psi = build_map(p.get("psi"), X.dim)
    images = X.samples if psi is None else psi(X.samples)
    row = build_values(I_spec, X) + images @ np.asarray(eta, dtype=float)
    vmin = float(row.min())
    members = np.flatnonzero(row <= vmin + 1e-8 * (1 + abs(vmin)))
    labels = kernels.cluster_labels_numpy(X.samples[members], 1e-3 * X.diameter())
    return int(labels.max() + 1)


# --------------------------------------------------------------------------
# three solutions
# --------------------------------------------------------------------------


def _functionals(p):
    dim = int(p.get("dim", 1))
    return functional(p.get("I", "zero"), dim), functional(p["J"], dim), dim


def run_three(cfg, out, budget, threads):
    p = cfg["params"]
    I, J, dim = _functionals(p)
    x_hat = np.asarray(nums(p["x_hat"]), dtype=float)
    try:
        bound = three_solutions.three_solution_radius_bound(I, J, x_hat)
    except HypothesisError as exc:
        out.results["hypothesis_failure"] = exc.check
        out.check("hypotheses of the radius bound", False)
        return
    out.results["radius_bound"] = bound.to_dict()
    expect = p.get("expect", {})
    if "radius_bound" in expect:
        out.check("radius bound value", abs(bound.value - num(expect["radius_bound"])) <= 1e-3)
        out.check("truncation sensitivity", bound.sensitivity < 1e-6)
    anchor = float(x_hat @ x_hat + J(x_hat) ** 2)
    g = three_solutions.graph_rho_r(J, bound.value, bound.r_cut, x_hat, budget, cfg.get("seed", 0))
    out.results["graph_rho_r"] = {"estimate": g, "anchor": anchor}
    out.check("sampled rho_r on the graph stays below the anchor", g <= anchor + 1e-9)
    r = num(p.get("radius", bound.value))
    try:
        w = three_solutions.find_three_solutions(I, J, r, spacing=num(p.get("spacing", 0.1)),
                                                 radius_bound=bound.value, hypotheses=bound.hypotheses)
    except NoWitnessFound as exc:
        out.warn(str(exc))
        return
    wd = w.to_dict()
    wd["type"] = "three-roots"
    out.witnesses.append(wd)
    out.check("three roots with residual below 1e-10", len(w.roots) >= 3 and max(w.residuals) < 1e-10)
    out.check("witness inside the radius", w.norm < r)
    if dim == 1 and p.get("I", "zero") in ("zero", "0"):
        # x - y0 + mu0 J'(x) = 0 is the scalar equation with a = mu0, b = y0
        oracle = three_solutions.scalar_three_roots(J, w.mu0, float(w.y0[0]))
        out.results["scalar_oracle_roots"] = oracle.roots
        out.check("root count matches the bisection oracle", oracle.count == len(w.roots))
    if "max_norm" in expect:
        out.check("witness norm", w.norm <= num(expect["max_norm"]))


def run_scalar(cfg, out, budget, threads):
    p = cfg["params"]
    J = functional(p["J"], 1)
    a, b = num(p["a"]), num(p["b"])
    lo, hi = nums(p.get("interval", [-10, 10]))
    oracle = three_solutions.scalar_three_roots(J, a, b, (lo, hi), int(p.get("n_brackets", 4000)))
    F = lambda x: x + a * J.grad(x) - b  # noqa: E731
    starts = np.linspace(lo, hi, int(p.get("starts", 81)))[:, None]
    roots = [float(z[0]) for z in three_solutions.solve_deflated(F, starts)]
    roots = [z for z in roots if lo <= z <= hi]
    out.results["bisection_roots"] = oracle.roots
    out.results["deflated_roots"] = roots
    out.check("at least three roots", oracle.count >= int(p.get("min_roots", 3)))
    same = len(roots) == oracle.count and all(abs(u - v) <= 1e-9 for u, v in zip(roots, oracle.roots))
    out.check("deflated Newton matches the bisection oracle", same)
    out.witnesses.append({"type": "scalar-roots", "roots": oracle.roots})


# --------------------------------------------------------------------------
# kirchhoff
# --------------------------------------------------------------------------


def _state_rows(problem, forcing, found, certs=None):
    rows = []
    for k, (s, E) in enumerate(found):
        res, margin = kirchhoff.residual_check(s, problem, forcing)
        row = {"u": s.u, "q": s.q, "energy": E, "residual": res, "q_margin": margin, "max_abs": s.sup(),
               "embedding": kirchhoff.embedding_check(s)}
        if certs is not None:
            row["certification"] = certs[k]
        rows.append(row)
    return rows


def _dump_states(out, name, problem, states):
    for k, s in enumerate(states):
        out.artifacts[f"{name}.state{k}.csv"] = (problem, s)


def run_multistart(cfg, out, budget, threads):
    p = cfg["params"]
    problem = build_problem(p)
    forcing = build_forcing(p["forcing"], problem.t)
    starts = kirchhoff.default_starts(problem, int(p.get("starts", 50)), cfg.get("seed", 0))
    found = kirchhoff.solve_multistart(problem, forcing, starts)
    fn = lambda t: build_forcing(p["forcing"], t)  # noqa: E731
    certs = [kirchhoff.certify_classical(s, problem, fn) for s, _ in found]
    rows = _state_rows(problem, forcing, found, certs)
    out.results["states"] = [{k: v for k, v in r.items() if k != "u"} for r in rows]
    states = [s for s, _ in found]
    out.witnesses.append({"type": "kirchhoff-states", "forcing": forcing.to_dict(), "n": problem.n,
                          "states": [{"u": r["u"], "q": r["q"]} for r in rows]})
    _dump_states(out, cfg["name"], problem, states)
    tol = num(p.get("tol_res", 1e-8)) * forcing.scale()
    out.check("every state solves the difference equation", all(r["residual"] < tol for r in rows))
    out.check("every state certified classical", all(c["classical"] for c in certs))
    out.check("embedding inequality", all(r["embedding"] for r in rows))
    expect = p.get("expect", {})
    if "count" in expect:
        out.check("state count", len(found) == int(expect["count"]))
    if expect.get("odd_symmetric"):
        out.check("state set closed under u -> -u", kirchhoff.symmetric_closed(states, problem.h))
    if "eigen_amplitude" in expect:
        amp = num(expect["eigen_amplitude"])
        errs = eigen_errors(problem, states, amp)
        out.results["nodal_errors"] = errs
        out.check("nodal error against the exact state", max(errs) < num(expect.get("nodal_tol", 1e-3)))
        exact = kirchhoff.eigen_state(problem, amp)
        res, _ = kirchhoff.residual_check(exact, problem, forcing)
        out.results["exact_state_residual"] = res
        out.check("residual of the exact state", res < num(expect.get("residual_tol", 5e-3)))
        nonzero = [s for s in states if s.sup() > 0.5 * amp]
        out.check("q of the nonzero states", all(abs(s.q - num(expect.get("q", 0.5))) < 1e-3 for s in nonzero))
        if "refine_n" in expect:
            fine = problem.with_n(int(expect["refine_n"]))
            ff = build_forcing(p["forcing"], fine.t)
            fine_found = kirchhoff.solve_multistart(fine, ff, kirchhoff.default_starts(fine, int(p.get("starts", 50)), cfg.get("seed", 0)))
            fine_errs = eigen_errors(fine, [s for s, _ in fine_found], amp)
            ratio = max(errs) / max(fine_errs)
            out.results["refinement"] = {"n": fine.n, "nodal_errors": fine_errs, "ratio": ratio}
            out.check("nodal error ratio under doubling in [3.5, 4.5]", 3.5 <= ratio <= 4.5)


def eigen_errors(problem, states, amp):
    exact = amp * np.sin(math.pi * problem.t)
    errs = []
    for s in states:
        if s.sup() > 0.5 * amp:
            ref = exact if float(s.u @ exact) > 0 else -exact
            errs.append(float(np.abs(s.u - ref).max()))
    return errs


def run_search(cfg, out, budget, threads):
    p = cfg["params"]
    problem = build_problem(p)
    fam = p.get("family", {})
    family = kirchhoff.ForcingFamily(int(fam.get("degree", 0)), num(fam.get("lattice_step", 1.0)),
                                     num(fam.get("coeff_bound", 4.0)))
    ok, pair = kirchhoff.nonconstancy_check(problem.f, problem.rho)
    out.results["nonconstancy"] = {"nonconstant": ok, "witness": pair}
    if not ok:
        out.warn("f is constant near 0; no forcing can give two solutions")
        out.check("search refused for constant f", True)
        return
    try:
        pair_ = kirchhoff.search_alpha_beta(problem, family,
                                            max_forcings=int(math.ceil(num(p.get("max_forcings", 200)) * budget)),
                                            n_starts=int(p.get("starts", 30)), seed=cfg.get("seed", 0),
                                            tol_res=num(p.get("tol_res", 1e-8)), threads=threads)
    except NoWitnessFound as exc:
        out.warn(str(exc))
        out.results["best_candidate"] = exc.best
        return
    d = pair_.to_dict(problem)
    out.results["search"] = {k: v for k, v in d.items() if k != "states"}
    out.results["states"] = [{k: v for k, v in s.items() if k != "u"} for s in d["states"]]
    out.witnesses.append({"type": "kirchhoff-states", "forcing": pair_.forcing.to_dict(), "n": problem.n,
                          "min_count": 2, "states": [{"u": s["u"], "q": s["q"]} for s in d["states"]]})
    _dump_states(out, cfg["name"], problem, pair_.states)
    out.check("at least two verified classical states", len(pair_.states) >= 2)


def run_uniqueness(cfg, out, budget, threads):
    p = cfg["params"]
    seed = cfg.get("seed", 0)
    problem = build_problem(p)
    rng = np.random.default_rng(seed)
    forcings = kirchhoff.random_forcings(rng, problem.t, int(p.get("forcings", 20)), int(p.get("degree", 2)),
                                         num(p.get("bound", 2.0)))
    rep = kirchhoff.uniqueness_probe(problem, forcings, int(p.get("starts", 50)), seed)
    out.results["probe"] = rep
    out.check("one cluster per forcing", rep["violations"] == 0)
    out.check("spread below 1e-8", rep["max_spread"] < 1e-8)
    if "closed_form" in p:
        cf = p["closed_form"]
        forcing = build_forcing(cf["forcing"], problem.t)
        found = kirchhoff.solve_multistart(problem, forcing, kirchhoff.default_starts(problem, 10, seed))
        (s, E), = found
        q_star = num(cf["q"])
        u_star = 0.5 * (1 - q_star) * problem.t * (1 - problem.t)
        err = float(np.abs(s.u - u_star).max())
        # the difference equation is exact on quadratics, so q_h solves
        # q = (1 - q)^2 (1 - h^2) / 12 exactly
        q_disc = (1 - s.q) ** 2 * (1 - problem.h ** 2) / 12.0
        out.results["closed_form"] = {"nodal_error": err, "q": s.q, "q_closed_form": q_star,
                                      "q_difference": s.q - q_star, "discrete_fixed_point_error": s.q - q_disc}
        out.check("closed-form state within 1e-6", err < 1e-6)
        out.check("q within the O(h^2) interpolation bias", abs(s.q - q_star) < problem.h ** 2)
        out.witnesses.append({"type": "kirchhoff-states", "forcing": forcing.to_dict(), "n": problem.n,
                              "min_count": 1, "states": [{"u": s.u, "q": s.q}]})
        _dump_states(out, cfg["name"], problem, [s])


def run_validate(cfg, out, budget, threads):
    for case in cfg["params"]["cases"]:
        problem = build_problem(case)
        rep = kirchhoff.validate_problem(problem)
        ok, pair = kirchhoff.nonconstancy_check(problem.f, problem.rho)
        rep["f nonconstant"] = ok
        rep["nonconstancy witness"] = pair
        out.results[case["label"]] = rep
        if "expect_ok" in case:
            out.check(f"{case['label']}: validation outcome", rep["ok"] == bool(case["expect_ok"]))
        if "expect_nonconstant" in case:
            out.check(f"{case['label']}: nonconstancy", ok == bool(case["expect_nonconstant"]))
        for key, want in case.get("expect_checks", {}).items():
            out.check(f"{case['label']}: {key}", rep[key] == bool(want))


RUNNERS = {
    ("chebyshev", None): run_chebyshev,
    ("minimax", "gap"): run_gap,
    ("minimax", "sup-inf-bound"): run_sup_inf,
    ("minimax", "ball-condition"): run_ball_condition,
    ("minimax", "eta"): run_eta,
    ("three-solutions", "witness"): run_three,
    ("three-solutions", "scalar"): run_scalar,
    ("kirchhoff", "multistart"): run_multistart,
    ("kirchhoff", "search"): run_search,
    ("kirchhoff", "uniqueness"): run_uniqueness,
    ("validate", None): run_validate,
}


# --------------------------------------------------------------------------
# run and verify
# --------------------------------------------------------------------------


def run_config(cfg, seed=None, budget_scale=None, threads=1):
    """Run one config; returns (report, artifacts).  The report echoes the
    effective config, so ``verify_report`` can rebuild every input."""
    validate_config(cfg)
    cfg = copy.deepcopy(cfg)
    if seed is not None:
        cfg["seed"] = int(seed)
    cfg.setdefault("seed", 0)
    if budget_scale is not None:
        cfg["budget_scale"] = float(budget_scale)
    budget = float(cfg.get("budget_scale", 1.0))
    out = Outcome()
    runner = RUNNERS[(cfg["kind"], cfg.get("task"))]
    try:
        runner(cfg, out, budget, threads)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad parameters for {cfg['name']}: {exc!r}") from exc
    report = {
        "name": cfg["name"],
        "version": __version__,
        "config": cfg,
        "results": out.results,
        "witnesses": out.witnesses,
        "checks": out.checks,
        "warnings": out.warnings,
        "passed": all(out.checks.values()),
    }
    return clean(report), out.artifacts


def write_state_artifacts(artifacts, out_dir):
    for fname, (problem, state) in artifacts.items():
        kirchhoff.write_state_csv(out_dir / fname, problem, state)


def verify_witness(cfg, w):
    """Oracle recheck of one stored witness; returns (ok, note)."""
    p = cfg["params"]
    kind = w.get("type")
    if kind == "double-minimum":
        X, psi, _, phi, _ = _chebyshev_inputs(p)
        ver = chebyshev.verify_double_minimum(np.asarray(w["y0"], dtype=float), psi, X, phi)
        return ver.n_clusters >= 2, f"{ver.n_clusters} clusters"
    if kind == "eta-two-minima":
        n = count_eta_clusters(cfg, w["I"], w["eta"])
        return n >= 2, f"{n} clusters"
    if kind == "gap":
        est = [gap_on_grid(w["f"], g) for g in w["grids"]]
        ok = all(abs(e.sup_inf - s["sup_inf"]) <= 1e-12 and abs(e.inf_sup - s["inf_sup"]) <= 1e-12
                 for e, s in zip(est, w["estimates"]))
        return ok and len(est) == len(w["estimates"]), "recomputed"
    if kind == "ball-condition":
        X, psi, _, phi, u0 = _chebyshev_inputs(p)
        vals = build_values(p.get("I"), X)
        images = X.samples if psi is None else psi(X.samples)
        first = float((vals + np.linalg.norm(images - u0, axis=1) * num(p["r"])).min())
        ok = abs(first - w["first_term"]) <= 1e-12 and \
            abs(w["first_term"] - w["second_term"] - w["osc_phi"] - w["margin"]) <= 1e-12
        return ok, "closed-form term recomputed"
    if kind == "three-roots":
        I, J, dim = _functionals(p)
        F = three_solutions.equation(I, J, np.asarray(w["y0"], dtype=float), float(w["mu0"]))
        roots = [np.asarray(z, dtype=float) for z in w["roots"]]
        res = [float(np.linalg.norm(F(z))) for z in roots]
        sep = min((float(np.linalg.norm(a - b)) for i, a in enumerate(roots) for b in roots[i + 1:]), default=0.0)
        return len(roots) >= 3 and max(res) < 1e-10 and sep > 1e-6, f"max residual {max(res):.3g}"
    if kind == "scalar-roots":
        J = functional(p["J"], 1)
        a, b = num(p["a"]), num(p["b"])
        xs = np.asarray(w["roots"], dtype=float)
        res = np.abs(xs + a * J.grad(xs[:, None])[:, 0] - b) if len(xs) else np.zeros(0)
        return bool(len(xs) >= 1 and res.max() < 1e-9 * (1 + abs(a))), "residuals recomputed"
    if kind == "kirchhoff-states":
        problem = build_problem(p).with_n(int(w["n"]))
        forcing = kirchhoff.make_forcing(w["forcing"]["alpha"], w["forcing"]["beta"], problem.t)
        tol = num(p.get("tol_res", 1e-8)) * forcing.scale()
        for s in w["states"]:
            u = np.asarray(s["u"], dtype=float)
            q = kernels.dirichlet_energy_numpy(u, problem.h)
            if not q < problem.q_max:
                return False, "q constraint violated"
            st = kirchhoff.DiscreteState(u, q)
            res, _ = kirchhoff.residual_check(st, problem, forcing)
            if not (res < tol and kirchhoff.embedding_check(st)):
                return False, f"residual {res:.3g}"
        return len(w["states"]) >= int(w.get("min_count", 1)), f"{len(w['states'])} states"
    return False, f"unknown witness type {kind!r}"


def verify_report(report):
    """Re-run only the oracle checks on a report's witnesses."""
    try:
        cfg = report["config"]
        witnesses = report["witnesses"]
        validate_config(cfg)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed report: {exc!r}") from exc
    rows = []
    for w in witnesses:
        try:
            ok, note = verify_witness(cfg, w)
        except (KeyError, TypeError, ValueError, IndexError, LabError) as exc:
            ok, note = False, f"oracle failed: {exc!r}"
        rows.append({"type": w.get("type"), "ok": bool(ok), "note": note})
    warnings = [] if witnesses else ["report has no witnesses; nothing to falsify"]
    return {"ok": all(r["ok"] for r in rows), "witnesses": rows, "warnings": warnings}
