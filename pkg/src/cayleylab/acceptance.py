"""The acceptance battery: exponent fits, exactness oracles, bound checks.

Each check returns a :class:`CheckResult` with a deterministic detail line
and deterministic artifact files (fixed float formatting, no timestamps),
so the whole battery can be diffed byte-for-byte across runs. The ``quick``
flag switches to a scaled-down smoke battery for fast determinism checks;
it is not acceptance evidence.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import stats as sps

from .bounds import (BoundParams, FreeGroupVolume, PolynomialVolume,
                     TabulatedVolume, heat_kernel_bound, occupation_split,
                     return_bound, wsf_split)
from .groups import parse_group
from .harness import (ExperimentConfig, fit_exponent, records_to_csv,
                      rows_to_csv, run_experiment, trial_rng, wide_wsf_rows)
from .lerw import loop_erase
from .metric import build_ball
from .walk import estimate_return_probability, make_step_distribution
from .wsf import build_wired_ball, wilson_wired

DEFAULT_SEED = 20240811


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    artifacts: dict[str, str] = field(default_factory=dict)

    def report_line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def _fmt(x: float) -> str:
    return format(x, ".4g")


# ---------------------------------------------------------------------------
# criterion 1: occupation-time exponents


def check_occupation_exponents(seed: int = DEFAULT_SEED, quick: bool = False,
                               workers: int = 1) -> CheckResult:
    """Z^3 lazy occupation exponent in [1.7, 2.3]; F2 in [0.7, 1.3]."""
    z_radii, f_radii = (2, 4, 8, 16), (2, 4, 8, 16, 32)
    trials = 2000
    if quick:
        z_radii, f_radii, trials = (2, 4, 8), (2, 4, 8), 200
    rec_z = run_experiment(ExperimentConfig(
        "Z^3", "occupation", z_radii, trials, seed=seed, lazy=True,
        workers=workers))
    fit_z = fit_exponent(rec_z)
    rec_f = run_experiment(ExperimentConfig(
        "F2", "occupation", f_radii, trials, seed=seed, lazy=True,
        workers=workers))
    fit_f = fit_exponent(rec_f)
    ok_z = 1.7 <= fit_z.slope <= 2.3
    ok_f = 0.7 <= fit_f.slope <= 1.3
    return CheckResult(
        "occupation-exponents", ok_z and ok_f,
        f"Z^3 slope {_fmt(fit_z.slope)} in [1.7,2.3] ({'ok' if ok_z else 'out'}); "
        f"F2 slope {_fmt(fit_f.slope)} in [0.7,1.3] ({'ok' if ok_f else 'out'})",
        {"occupation_z3.csv": records_to_csv(rec_z),
         "occupation_f2.csv": records_to_csv(rec_f)})


# ---------------------------------------------------------------------------
# criterion 2: exit-time exponents and the gambler's-ruin oracle


def check_exit_times(seed: int = DEFAULT_SEED, quick: bool = False,
                     workers: int = 1) -> CheckResult:
    """Exit exponent in [1.8, 2.2] on Z^3 and H3; lazy Z exit of B(o,1) near 8."""
    radii = (2, 4, 8) if quick else (2, 4, 8, 16)
    trials = 300 if quick else 2000
    z1_trials = 5000 if quick else 100_000
    fits = {}
    artifacts = {}
    for grp in ("Z^3", "H3"):
        recs = run_experiment(ExperimentConfig(
            grp, "exit", radii, trials, seed=seed, lazy=True, workers=workers))
        fits[grp] = fit_exponent(recs)
        artifacts[f"exit_{grp.replace('^', '')}.csv"] = records_to_csv(recs)
    rec1 = run_experiment(ExperimentConfig(
        "Z", "exit", (1,), z1_trials, seed=seed, lazy=True, workers=workers))[0]
    # gambler's ruin: E[tau_1] = (r+1)^2 = 4, doubled by 1/2 laziness
    ok_mean = abs(rec1.mean - 8.0) <= 3 * rec1.sem
    ok_fits = all(1.8 <= f.slope <= 2.2 for f in fits.values())
    detail = "; ".join(
        [f"{g} slope {_fmt(fits[g].slope)} in [1.8,2.2]" for g in fits]
        + [f"lazy Z tau_1 {_fmt(rec1.mean)} vs 8 (3 sem = {_fmt(3 * rec1.sem)})"])
    artifacts["exit_z1.csv"] = records_to_csv([rec1])
    return CheckResult("exit-times", ok_fits and ok_mean, detail, artifacts)


# ---------------------------------------------------------------------------
# criterion 3: WSF ball-volume exponents


def check_wsf_volume_exponents(seed: int = DEFAULT_SEED, quick: bool = False,
                               workers: int = 1) -> CheckResult:
    """E|T_o ∩ B(o,r)| exponent: Z^5 in [3.4, 4.6], F2 in [1.6, 2.4].

    Z^5 uses the exact wired sampler (R = 2r). The F2 wired ball at R = 16
    is past the element cap, so F2 runs the truncated rooted-at-infinity
    sampler with escape radius 4r (the two are cross-validated elsewhere).
    """
    radii = (2, 3, 4) if quick else (2, 3, 4, 6, 8)
    trials = 60 if quick else 500
    rec_z = run_experiment(ExperimentConfig(
        "Z^5", "wsf_volume", radii, trials, seed=seed, wired_factor=2,
        workers=workers))
    fit_z = fit_exponent([r for r in rec_z if r.label == "T"])
    rec_f = run_experiment(ExperimentConfig(
        "F2", "wsf_component", radii, trials, seed=seed, escape_factor=4.0,
        workers=workers))
    fit_f = fit_exponent([r for r in rec_f if r.label == "T"])
    ok_z = 3.4 <= fit_z.slope <= 4.6
    ok_f = 1.6 <= fit_f.slope <= 2.4
    return CheckResult(
        "wsf-volume-exponents", ok_z and ok_f,
        f"Z^5 slope {_fmt(fit_z.slope)} in [3.4,4.6] ({'ok' if ok_z else 'out'}); "
        f"F2 slope {_fmt(fit_f.slope)} in [1.6,2.4] ({'ok' if ok_f else 'out'})",
        {"wsf_z5.csv": rows_to_csv(wide_wsf_rows(rec_z),
                                   ("r", "trials", "mean_T", "sem_T", "mean_C",
                                    "sem_C", "mean_Nr", "sem_Nr")),
         "wsf_f2.csv": rows_to_csv(wide_wsf_rows(rec_f),
                                   ("r", "trials", "mean_T", "sem_T", "mean_C",
                                    "sem_C", "mean_Nr", "sem_Nr"))})


# ---------------------------------------------------------------------------
# criterion 4: |C(o,r)| <= 4 E^2[tau_6r] and E[N_r] <= 2 E[tau_3r]


def check_component_inequality(seed: int = DEFAULT_SEED, quick: bool = False,
                               workers: int = 1) -> CheckResult:
    radii = (3, 4) if quick else (3, 4, 6)
    wsf_trials = 120 if quick else 500
    exit_trials = 600 if quick else 2000
    rows = []
    all_ok = True
    for grp in ("Z^5", "LL"):
        wsf_recs = run_experiment(ExperimentConfig(
            grp, "wsf_volume", radii, wsf_trials, seed=seed, wired_factor=2,
            workers=workers))
        exit_radii = tuple(sorted({3 * r for r in radii} | {6 * r for r in radii}))
        exit_recs = run_experiment(ExperimentConfig(
            grp, "exit", exit_radii, exit_trials, seed=seed, lazy=True,
            workers=workers))
        tau = {rec.r: rec for rec in exit_recs}
        for r in radii:
            c_rec = next(x for x in wsf_recs if x.r == r and x.label == "C")
            n_rec = next(x for x in wsf_recs if x.r == r and x.label == "N")
            bound_c = 4.0 * tau[6 * r].mean ** 2
            ok_c = c_rec.ci_high <= bound_c
            bound_n = 2.0 * tau[3 * r].mean
            slack_n = 1.96 * math.hypot(n_rec.sem, 2.0 * tau[3 * r].sem)
            ok_n = n_rec.mean <= bound_n + slack_n
            all_ok &= ok_c and ok_n
            rows.append({
                "group": grp, "r": r,
                "mean_C": c_rec.mean, "ci_high_C": c_rec.ci_high,
                "bound_4Etau6r_sq": bound_c, "pass_C": ok_c,
                "mean_N": n_rec.mean, "bound_2Etau3r": bound_n, "pass_N": ok_n,
            })
    detail = "; ".join(
        f"{row['group']} r={row['r']}: C ci {_fmt(row['ci_high_C'])} <= "
        f"{_fmt(row['bound_4Etau6r_sq'])}, N {_fmt(row['mean_N'])} <= "
        f"{_fmt(row['bound_2Etau3r'])}" for row in rows)
    return CheckResult(
        "component-inequality", all_ok, detail,
        {"theorem_c.csv": rows_to_csv(rows, ("group", "r", "mean_C", "ci_high_C",
                                             "bound_4Etau6r_sq", "pass_C",
                                             "mean_N", "bound_2Etau3r", "pass_N"))})


# ---------------------------------------------------------------------------
# criterion 5: exact sampler frequencies vs spanning-tree enumeration


def _enumerate_parent_maps(graph) -> dict[tuple, int]:
    """All parent maps that form spanning trees, weighted by multiplicity."""
    n = graph.n_inner
    options = []
    for v in range(n):
        counts = Counter(int(w) for w in graph.adjacency[v])
        options.append(sorted(counts.items()))
    trees: dict[tuple, int] = {}
    for combo in itertools.product(*options):
        parent = tuple(t for t, _ in combo)
        ok = True
        for v in range(n):
            seen = 0
            u = v
            while u != n:
                u = parent[u]
                seen += 1
                if seen > n:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            weight = 1
            for _, mult in combo:
                weight *= mult
            trees[parent] = weight
    return trees


def _matrix_tree_count(graph) -> int:
    """Spanning-tree count of the wired multigraph via the Laplacian minor."""
    n = graph.n_inner
    lap = np.zeros((n, n))
    for v in range(n):
        for w in graph.adjacency[v]:
            w = int(w)
            lap[v, v] += 1
            if w != n:
                lap[v, w] -= 1
    return int(round(float(np.linalg.det(lap))))


def _sample_tree_counts(graph, seed: int, stream: int, samples: int,
                        order=None) -> Counter:
    counts: Counter = Counter()
    for trial in range(samples):
        rng = trial_rng(seed, "wsf_volume", stream, trial)
        forest = wilson_wired(graph, rng, vertex_order=order)
        counts[tuple(int(p) for p in forest.parent)] += 1
    return counts


def check_sampler_exactness(seed: int = DEFAULT_SEED, quick: bool = False,
                            workers: int = 1) -> CheckResult:
    """Wilson tree frequencies match enumeration (chi-square p > 0.01)."""
    samples = 20_000 if quick else 100_000
    rows = []
    all_ok = True
    graphs = {}
    for stream, (grp, big_r) in enumerate((("Z", 1), ("Z^2", 1)), start=101):
        model = parse_group(grp)
        dist = make_step_distribution(model, lazy=False)
        oracle = build_ball(model, big_r)
        graph = build_wired_ball(dist, oracle, big_r)
        graphs[grp] = graph
        trees = _enumerate_parent_maps(graph)
        total = sum(trees.values())
        assert total == _matrix_tree_count(graph)
        counts = _sample_tree_counts(graph, seed, stream, samples)
        assert sum(counts.values()) == samples
        assert set(counts) <= set(trees)
        categories = sorted(trees)
        f_obs = [counts.get(cat, 0) for cat in categories]
        f_exp = [samples * trees[cat] / total for cat in categories]
        p_value = float(sps.chisquare(f_obs, f_exp).pvalue)
        ok = p_value > 0.01
        all_ok &= ok
        rows.append({"graph": f"{grp} R={big_r}", "n_trees": len(trees),
                     "weight_total": total, "samples": samples,
                     "chi2_p": p_value, "passed": ok})
    # ordering invariance on the Z R=1 instance
    graph = graphs["Z"]
    counts_a = _sample_tree_counts(graph, seed, 201, samples)
    rev = list(range(graph.n_inner))[::-1]
    counts_b = _sample_tree_counts(graph, seed, 202, samples, order=rev)
    categories = sorted(set(counts_a) | set(counts_b))
    table = np.array([[counts_a.get(c, 0) for c in categories],
                      [counts_b.get(c, 0) for c in categories]])
    p_order = float(sps.chi2_contingency(table).pvalue)
    ok_order = p_order > 0.01
    all_ok &= ok_order
    rows.append({"graph": "Z R=1 order-invariance", "n_trees": len(categories),
                 "weight_total": 0, "samples": 2 * samples,
                 "chi2_p": p_order, "passed": ok_order})
    detail = "; ".join(f"{row['graph']}: p={_fmt(row['chi2_p'])}" for row in rows)
    return CheckResult(
        "sampler-exactness", all_ok, detail,
        {"wilson_chi2.csv": rows_to_csv(rows, ("graph", "n_trees", "weight_total",
                                               "samples", "chi2_p", "passed"))})


# ---------------------------------------------------------------------------
# criterion 6: loop-erasure equivalence with the literal definition


def _loop_erase_reference(path):
    """Quadratic re-scan implementation of the chronological definition."""
    out = [path[0]]
    n = len(path)
    while True:
        u = out[-1]
        k = n - 1 - path[::-1].index(u)  # last index with path[k] == u
        if k < n - 1:
            out.append(path[k + 1])
        else:
            return out


def check_loop_erasure(seed: int = DEFAULT_SEED, quick: bool = False,
                       workers: int = 1) -> CheckResult:
    """Single-pass eraser equals the reference on random Z^2 paths."""
    n_paths = 2000 if quick else 10_000
    steps = 200
    model = parse_group("Z^2")
    gens = model.generators
    mismatches = 0
    property_failures = 0
    for trial in range(n_paths):
        rng = trial_rng(seed, "occupation", 9999, trial)
        path = [model.identity()]
        for j in rng.integers(0, len(gens), size=steps):
            path.append(model.multiply(path[-1], gens[j]))
        fast = loop_erase(path)
        if fast != _loop_erase_reference(path):
            mismatches += 1
            continue
        simple = len(set(fast)) == len(fast)
        endpoints = fast[0] == path[0] and fast[-1] == path[-1]
        idempotent = loop_erase(fast) == fast
        adjacent = all(model.multiply(model.inverse(a), b) in gens
                       for a, b in zip(fast, fast[1:]))
        if not (simple and endpoints and idempotent and adjacent):
            property_failures += 1
    ok = mismatches == 0 and property_failures == 0
    return CheckResult(
        "loop-erasure", ok,
        f"{n_paths} paths x {steps} steps: {mismatches} mismatches, "
        f"{property_failures} property failures",
        {"loop_erasure.csv": rows_to_csv(
            [{"paths": n_paths, "steps": steps, "mismatches": mismatches,
              "property_failures": property_failures}],
            ("paths", "steps", "mismatches", "property_failures"))})


# ---------------------------------------------------------------------------
# criterion 7: bounds module numerics


def check_bounds_numerics(seed: int = DEFAULT_SEED, quick: bool = False,
                          workers: int = 1) -> CheckResult:
    rows = []
    checks = []
    v_exp = FreeGroupVolume(2)
    grid = (4, 8, 16, 32, 64, 128)

    # c is a free fit parameter; 0.8 keeps the exponential kill term's
    # small-r transient from dominating the spread
    params3 = BoundParams(c=0.8, k=3)
    ratios = [occupation_split(r, v_exp, params3).tail_value / r**2 for r in grid]
    occ_ratio = max(ratios) / min(ratios)
    checks.append(("sigma2/r^2 max/min < 10", occ_ratio < 10, occ_ratio))

    totals = [occupation_split(r, v_exp, params3).total
              / (r**2 * math.sqrt(v_exp.log_value(float(r)))) for r in grid]
    tot_ratio = max(totals) / min(totals)
    checks.append(("total/(r^2 sqrt(log V)) spread < 4", tot_ratio < 4, tot_ratio))

    params5 = BoundParams(c=0.8, k=5)
    ratios4 = [wsf_split(r, v_exp, params5).tail_value / r**4 for r in grid]
    wsf_ratio = max(ratios4) / min(ratios4)
    checks.append(("sigma4/r^4 max/min < 10", wsf_ratio < 10, wsf_ratio))

    m_big = 10_000
    got = return_bound(PolynomialVolume(3.0), m_big, BoundParams(c=1.0 - 1e-12,
                                                                 c_prime=1.0))
    want = math.gamma(2.5) * m_big ** -1.5
    gamma_rel = abs(got - want) / want
    checks.append(("return_bound Gamma asymptote within 1%", gamma_rel < 0.01,
                   gamma_rel))

    # fitted heat-kernel bound dominates Monte Carlo p_m(o,o) on Z^3
    model = parse_group("Z^3")
    dist = make_step_distribution(model, lazy=True)
    oracle = build_ball(model, 8)
    v_tab = TabulatedVolume(oracle)
    hk = BoundParams(c=0.5, k=2)
    trials = 30_000 if quick else 200_000
    r_probe = 4
    p_hat = {}
    for m in (8, 16, 32, 64):
        rng = trial_rng(seed, "return_prob", m, 0)
        p_hat[m] = estimate_return_probability(dist, m, trials, rng).mean
    c_fit = p_hat[8] / heat_kernel_bound(r_probe, 8, v_tab, hk)
    dominated = True
    for m in (16, 32, 64):
        bound = c_fit * heat_kernel_bound(r_probe, m, v_tab, hk)
        dominated &= p_hat[m] <= bound
        rows.append({"m": m, "p_hat": p_hat[m], "bound": bound,
                     "dominated": p_hat[m] <= bound})
    checks.append(("fitted hk bound dominates MC p_m", dominated,
                   float(dominated)))

    all_ok = all(ok for _, ok, _ in checks)
    detail = "; ".join(f"{name}: {_fmt(val)} ({'ok' if ok else 'FAIL'})"
                       for name, ok, val in checks)
    artifacts = {
        "bounds_checks.csv": rows_to_csv(
            [{"check": name, "value": val, "passed": ok}
             for name, ok, val in checks], ("check", "value", "passed")),
        "bounds_dominance.csv": rows_to_csv(rows, ("m", "p_hat", "bound",
                                                   "dominated")),
    }
    return CheckResult("bounds-numerics", all_ok, detail, artifacts)


# ---------------------------------------------------------------------------
# criterion 8: determinism of the whole battery


def _mini_battery(seed: int, workers: int) -> dict[str, str]:
    out = {}
    rec = run_experiment(ExperimentConfig(
        "Z^3", "occupation", (2, 4), 40, seed=seed, lazy=True, workers=workers))
    out["occ.csv"] = records_to_csv(rec)
    rec = run_experiment(ExperimentConfig(
        "Z", "exit", (1, 2), 40, seed=seed, lazy=True, workers=workers))
    out["exit.csv"] = records_to_csv(rec)
    rec = run_experiment(ExperimentConfig(
        "Z^2", "wsf_volume", (1, 2), 40, seed=seed, workers=workers))
    out["wsf.csv"] = records_to_csv(rec)
    split_rows = [{"r": r, **_split_row(r)} for r in (4, 8, 16)]
    out["bounds.csv"] = rows_to_csv(split_rows, ("r", "split_point",
                                                 "sigma1_bound", "sigma2_value",
                                                 "total"))
    return out


def _split_row(r: int) -> dict:
    res = occupation_split(r, FreeGroupVolume(2), BoundParams(c=0.5, k=3))
    return {"split_point": res.split_point, "sigma1_bound": res.prefix_bound,
            "sigma2_value": res.tail_value, "total": res.total}


def check_determinism(seed: int = DEFAULT_SEED, quick: bool = False,
                      workers: int = 1) -> CheckResult:
    """Same seed twice gives identical bytes; worker count cannot matter."""
    first = _mini_battery(seed, workers=1)
    second = _mini_battery(seed, workers=1)
    parallel = _mini_battery(seed, workers=2)
    same_twice = first == second
    same_workers = first == parallel
    ok = same_twice and same_workers
    return CheckResult(
        "determinism", ok,
        f"repeat run identical: {same_twice}; workers 1 vs 2 identical: "
        f"{same_workers}", dict(first))


ALL_CHECKS: list[tuple[str, Callable[..., CheckResult]]] = [
    ("occupation-exponents", check_occupation_exponents),
    ("exit-times", check_exit_times),
    ("wsf-volume-exponents", check_wsf_volume_exponents),
    ("component-inequality", check_component_inequality),
    ("sampler-exactness", check_sampler_exactness),
    ("loop-erasure", check_loop_erasure),
    ("bounds-numerics", check_bounds_numerics),
    ("determinism", check_determinism),
]


def run_all(seed: int = DEFAULT_SEED, quick: bool = False, workers: int = 1,
            names: Optional[list[str]] = None) -> list[CheckResult]:
    results = []
    for name, fn in ALL_CHECKS:
        if names and name not in names:
            continue
        results.append(fn(seed=seed, quick=quick, workers=workers))
    return results
