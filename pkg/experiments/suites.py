"""
The named experiments. Each takes a validated ExperimentConfig and a
RunContext, writes its CSV/JSON artifacts into the run directory and returns
its result rows.
"""
from __future__ import annotations

import math
from functools import partial
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from bounds.exponential import bounded_laws, exp_inequality_check, two_point
from bounds.tails import exceedance_curve, mixing_tail_check, stopping_time_sums
from config.settings import COUPLING_CONFIG, MC_CONFIG
from coupling.berbee import berbee_couple, exact_phi, phi_mixing_chain
from coupling.embedding import default_dt, embed_ar_side
from coupling.gaps import GapReport, calibrate_constant, strong_approx_gap, z_statistics
from coupling.replication import (
    CouplingSetup,
    coupled_block,
    coupled_block_pair,
    coupled_loglr_pair,
    coupled_replication,
)
from coupling.skorokhod import ScoreLaw, skorokhod_stop
from coupling.wiener import BrownianPath, PathCursor, WienerFamily
from experiments.registry import ExperimentOutcome, RunContext, experiment_registry
from haar.expansion import (
    choose_j_star,
    coefficient_bounds_check,
    gram_matrix,
    haar_expand,
    j_star_required,
    parseval_check,
    residual_check,
    sup_slope,
)
from likelihood.hellinger import (
    analytic_gaussian_h2,
    block0_hellinger,
    estimate_from_logs,
    gaussian_shift_pair,
    hellinger_mc,
    lemma31_check,
    normalization_check,
)
from likelihood.events import event_diagnostics, event_frequencies, score_truncation, t2_mean_readings
from likelihood.loglr import loglr_ar, loglr_regression, remainder_bound, taylor_terms
from likelihood.partition import partition
from models.function_class import center_from_descriptor, random_center, random_perturbation, smooth_bump
from schemas.experiment_schema import ExperimentConfig, ExperimentContext
from simulate.samples import design_points, simulate_ar, simulate_fixed_design, simulate_random_design
from stationary.transfer import dobrushin_rho, lemma61_check, sample_stationary, solve_stationary
from utils.file_utils import write_csv, write_json
from utils.logger import get_logger
from utils.parallel import map_replications
from utils.rng import child_sequence, replication_seeds, substream

logger = get_logger(__name__)

SE_MULTIPLIER = MC_CONFIG["se_multiplier"]
DEFAULT_JOINT = [[0.4, 0.1], [0.1, 0.4]]


def _tree_depth(config: ExperimentConfig, default: int) -> int:
    return config.j_star if config.j_star is not None else int(config.param("depth", default))


def _coupling_setup(ctx: ExperimentContext, depth: int, design: Optional[str] = None) -> CouplingSetup:
    config = ctx.config
    return CouplingSetup(pf=ctx.pf, noise_p=ctx.noise_p, noise_q=ctx.noise_q, psi_f0=ctx.psi_f0,
                         A=config.A, B=config.B, depth=depth, design=design or config.design, dt=config.dt,
                         pilot_mode=config.pilot_mode, pilot_reps=config.pilot_reps,
                         pilot_seed=child_sequence(config.seed, "pilot"),
                         atoms=int(config.param("atoms", COUPLING_CONFIG["score_atoms"])))


def _block_start(setup: CouplingSetup, m: int, seed) -> Tuple[float, Optional[np.ndarray]]:
    state = float(sample_stationary(setup.psi_f0, 1, child_sequence(seed, "state"))[0])
    design = design_points(setup.psi_f0, m) if setup.design == "fixed" else None
    return state, design


# stationary

@experiment_registry.register("stationary-oracle",
                              "Stationary density of the center against its oracle and a long simulated chain")
def stationary_oracle(config: ExperimentConfig, run: RunContext) -> ExperimentOutcome:
    ctx = config.build_context()
    sd = ctx.psi_f0
    outcome = ExperimentOutcome(config.experiment)
    outcome.artifacts.append(str(sd.to_csv(run.path("stationary.csv"))))
    outcome.artifacts.append(str(sd.write_report(run.path("stationary.json"))))

    # constant drifts have the shifted noise density as exact fixed point
    oracle_max = float(config.param("oracle_l1_max", 1e-6))
    for theta in config.param("oracle_shifts", [0.0, 0.3]):
        theta = float(theta)
        desc = {"family": "constant", "value": theta} if theta else {"family": "zero"}
        shifted = solve_stationary(center_from_descriptor(desc, ctx.grid), ctx.noise_p)
        oracle = ctx.noise_p.pdf(ctx.grid.points - theta)
        l1 = float(ctx.grid.integrate(np.abs(shifted.psi.values - oracle)))
        outcome.rows.append(run.row(f"oracle_l1[theta={theta:g}]", l1, oracle_max, l1 < oracle_max))
        outcome.summary[f"oracle_l1_theta={theta:g}"] = l1

    steps = int(config.param("chain_steps", 100_000))
    traj = simulate_ar(ctx.pf, ctx.noise_p, sd, steps, child_sequence(config.seed, "chain"), law="f0")
    ks = float(stats.kstest(traj.x[1:], sd.cdf).statistic)
    ks_max = float(config.param("ks_max", 0.01))
    outcome.rows.append(run.row("chain_ks", ks, ks_max, ks < ks_max, n=steps, reps=1))
    outcome.summary.update({"rho": sd.rho, "iterations": sd.iterations, "residual": sd.residual, "ks": ks})
    return outcome


@experiment_registry.register("lemma61-sweep",
                              "Stationary-density Hellinger bound over random center/perturbation pairs")
def lemma61_sweep(config: ExperimentConfig, run: RunContext) -> ExperimentOutcome:
    ctx = config.build_context()
    pairs = int(config.param("pairs", 50))
    rng = substream(config.seed, "lemma61_pairs")
    records: List[Dict[str, Any]] = []
    for i in range(pairs):
        f0 = random_center(ctx.grid, ctx.spec, rng)
        g = random_perturbation(ctx.grid, ctx.spec, ctx.pf.gamma_n, ctx.pf.gamma_prime_n, rng)
        f = f0.with_values(f0.values + g.values, name="f")
        res = lemma61_check(f, f0, ctx.noise_p, M=config.M)
        records.append({"pair": i + 1, "lhs": res.lhs, "rhs": res.rhs, "rho": res.rho,
                        "sup_distance": res.sup_distance, "holds": res.holds})
    columns = ["pair", "lhs", "rhs", "rho", "sup_distance", "holds"]
    outcome = ExperimentOutcome(config.experiment, artifacts=[str(write_csv(run.path("lemma61.csv"), columns, records))])

    worst = max((r["lhs"] / r["rhs"] for r in records if r["rhs"] > 0), default=0.0)
    outcome.rows.append(run.row("bound", worst, 1.0, all(r["holds"] for r in records), n=config.n, reps=pairs))

    rho = dobrushin_rho(ctx.noise_p, config.M)
    outcome.summary["rho"] = rho
    if ctx.noise_p.family.kind == "gaussian":
        sigma = 1.0 / math.sqrt(ctx.noise_p.fisher_info)
        analytic = 2.0 * stats.norm.cdf(config.M / sigma) - 1.0
        outcome.rows.append(run.row("rho", rho, analytic, abs(rho - analytic) <= 1e-3))
        outcome.summary["rho_analytic"] = analytic
    return outcome


# haar

@experiment_registry.register("haar-suite",
                              "Haar orthonormality, coefficient bounds and pointwise residuals on random bumps")
def haar_suite(config: ExperimentConfig, run: RunContext) -> ExperimentOutcome:
    ctx = config.build_context()
    A, B = config.A, config.B
    levels = int(config.param("levels", 8))
    bumps = int(config.param("bumps", 20))

    gram = gram_matrix(A, B, max_level=int(config.param("gram_level", 4)))
    gram_dev = float(np.max(np.abs(gram - np.eye(gram.shape[0]))))

    rng = substream(config.seed, "haar_bumps")
    records: List[Dict[str, Any]] = []
    outcome = ExperimentOutcome(config.experiment)
    for i in range(bumps):
        width = rng.uniform(0.2, 1.0) * (B - A)
        a = rng.uniform(A, B - width)
        g = smooth_bump(ctx.grid, a, a + width, rng.uniform(0.05, 0.5))
        exp = haar_expand(g, A, B, levels)
        bounds = coefficient_bounds_check(exp, g, A, B)
        resid = residual_check(exp, g)
        parseval_ok, energy, total = parseval_check(exp, g)
        records.append({"bump": i + 1, "a": a, "b": a + width, "max_ratio": bounds.max_ratio,
                        "bounds_ok": bounds.ok, "max_residual": resid.max_residual,
                        "residual_bound": resid.bound + resid.slack, "residual_ok": resid.ok,
                        "energy": energy, "integral": total, "parseval_ok": parseval_ok})
        if i == 0:
            outcome.artifacts.append(str(exp.to_json(run.path("haar_expansion.json"))))
    columns = list(records[0].keys()) if records else ["bump"]
    outcome.artifacts.append(str(write_csv(run.path("haar_suite.csv"), columns, records)))

    outcome.rows.append(run.row("gram", gram_dev, 1e-6, gram_dev <= 1e-6))
    outcome.rows.append(run.row("coefficient_bounds", max((r["max_ratio"] for r in records), default=0.0), 1.0,
                                all(r["bounds_ok"] for r in records), reps=bumps))
    resid_ratio = max((r["max_residual"] / r["residual_bound"] for r in records if r["residual_bound"] > 0),
                      default=0.0)
    outcome.rows.append(run.row("residual", resid_ratio, 1.0, all(r["residual_ok"] for r in records), reps=bumps))
    outcome.rows.append(run.row("parseval", float(sum(r["parseval_ok"] for r in records)), float(bumps),
                                all(r["parseval_ok"] for r in records), reps=bumps))
    return outcome


# likelihood

def _normalization_draw(ctx: ExperimentContext, t: np.ndarray, seed) -> Tuple[float, float, float]:
    """log L of the three experiments on independent samples drawn under the center."""
    pf = ctx.pf
    traj = simulate_ar(pf, ctx.noise_p, ctx.psi_f0, ctx.n, child_sequence(seed, "ar"), law="f0")
    first = loglr_ar(traj, pf, ctx.noise_p, ctx.psi_f, ctx.psi_f0).total
    random_design = simulate_random_design(pf, ctx.noise_q, ctx.psi_f0, ctx.n, child_sequence(seed, "random"),
                                           law="f0")
    second = loglr_regression(random_design, pf, ctx.noise_q).total
    fixed_design = simulate_fixed_design(pf, ctx.noise_q, t, child_sequence(seed, "fixed"), law="f0")
    third = loglr_regression(fixed_design, pf, ctx.noise_q).total
    return first, second, third


@experiment_registry.register("likelihood-normalization",
                              "E[L] = 1 under the center for all three experiments, and (1/2)L1 <= H")
def likelihood_normalization(config: ExperimentConfig, run: RunContext) -> ExperimentOutcome:
    ctx = config.build_context()
    _ = (ctx.psi_f0, ctx.psi_f)  # solve once before the fan-out
    t = design_points(ctx.psi_f0, ctx.n)
    seeds = replication_seeds(config.seed, "normalization", config.reps)
    draws = map_replications(partial(_normalization_draw, ctx, t), seeds, workers=config.workers,
                             desc="normalization", on_result=run.flush("normalization"))
    logs = np.array(draws, dtype=float).reshape(-1, 3)
    records = [{"replication": i + 1, "log_l1": r[0], "log_l2": r[1], "log_l3": r[2]} for i, r in enumerate(logs)]
    outcome = ExperimentOutcome(config.experiment, artifacts=[
        str(write_csv(run.path("loglr.csv"), ["replication", "log_l1", "log_l2", "log_l3"], records))])

    for e in range(3):
        check = normalization_check(logs[:, e])
        outcome.rows.append(run.row(f"mean_L{e + 1}", check["mean"], 1.0, check["holds"], n=ctx.n,
                                    reps=config.reps, se=check["se"]))
    for other in (1, 2):
        est = estimate_from_logs(logs[:, 0], logs[:, other])
        outcome.rows.append(run.row(f"tv_L1_L{other + 1}", 0.5 * est.l1, est.hellinger, est.tv_bound_holds,
                                    n=ctx.n, reps=config.reps, se=0.5 * est.l1_se))
        outcome.summary[f"L1_L{other + 1}"] = est.to_dict()
    return outcome


@experiment_registry.register("hellinger-validation",
                              "Hellinger estimator against the closed form for a single Gaussian shift")
def hellinger_validation(config: ExperimentConfig, run: RunContext) -> ExperimentOutcome:
    outcome = ExperimentOutcome(config.experiment)
    records: List[Dict[str, Any]] = []
    for mu in config.param("mus", [0.1, 0.5, 1.0]):
        mu = float(mu)
        est = hellinger_mc(partial(gaussian_shift_pair, mu), config.reps, child_sequence(config.seed, f"mu={mu:g}"),
                           workers=config.workers, desc=f"gaussian shift {mu:g}")
        exact = analytic_gaussian_h2(mu)
        holds = abs(est.h2 - exact) <= SE_MULTIPLIER * est.h2_se and est.tv_bound_holds
        outcome.rows.append(run.row(f"mu={mu:g}", est.h2, exact, holds, n=1, reps=config.reps, se=est.h2_se))
        records.append({"mu": mu, "h2": est.h2, "h2_se": est.h2_se, "exact": exact, "l1": est.l1,
                        "tv_bound_holds": est.tv_bound_holds})
    outcome.artifacts.append(str(write_csv(run.path("hellinger_validation.csv"),
                                           ["mu", "h2", "h2_se", "exact", "l1", "tv_bound_holds"], records)))
    return outcome


# coupling

def _skorokhod_draw(law: ScoreLaw, dt: float, seed) -> Tuple[float, float]:
    result = skorokhod_stop(PathCursor(BrownianPath(seed, 0, dt)), law, seed)
    return result.tau, result.value


def _discrete_ks(values: np.ndarray, law: ScoreLaw) -> float:
    """sup |F_n - F| between the empirical law of ``values`` and ``law``; both jump only at the atoms."""
    ordered = np.sort(values)
    empirical = np.searchsorted(ordered, law.values, side="right") / ordered.size
    return float(np.max(np.abs(empirical - law.cdf(law.values))))


def _wald(taus: np.ndarray, variance: float) -> Tuple[float, float, bool]:
    mean = float(np.mean(taus))
    se = float(np.std(taus, ddof=1) / math.sqrt(taus.size))
    return mean, se, abs(mean - variance) <= SE_MULTIPLIER * se + 1e-12


@experiment_registry.register("skorokhod-embedding",
                              "Embedded value law, Wald identity and the two-point exit values")
def skorokhod_embedding(config: ExperimentConfig, run: RunContext) -> ExperimentOutcome:
    ctx = config.build_context()
    draws = int(config.param("draws", 10_000))
    outcome = ExperimentOutcome(config.experiment)

    law = ScoreLaw.from_noise(ctx.noise_p, int(config.param("atoms", COUPLING_CONFIG["score_atoms"])))
    dt = config.dt or default_dt(law)
    pairs = map_replications(partial(_skorokhod_draw, law, dt), replication_seeds(config.seed, "score_law", draws),
                             workers=config.workers, desc="score embedding")
    taus = np.array([p[0] for p in pairs])
    values = np.array([p[1] for p in pairs])
    ks = _discrete_ks(values, law)
    ks_max = float(config.param("ks_max", 0.02))
    outcome.rows.append(run.row("score_ks", ks, ks_max, ks < ks_max, reps=draws))
    mean, se, holds = _wald(taus, law.variance)
    outcome.rows.append(run.row("score_wald", mean, law.variance, holds, reps=draws, se=se))

    a = float(config.param("two_point_a", 1.0))
    two = ScoreLaw([-a, a], [0.5, 0.5])
    pairs2 = map_replications(partial(_skorokhod_draw, two, config.dt or default_dt(two)),
                              replication_seeds(config.seed, "two_point", draws), workers=config.workers,
                              desc="two-point embedding")
    taus2 = np.array([p[0] for p in pairs2])
    values2 = np.array([p[1] for p in pairs2])
    exact = float(np.mean(np.abs(values2) == a))
    outcome.rows.append(run.row("two_point_values", exact, 1.0, exact == 1.0, reps=draws))
    mean2, se2, holds2 = _wald(taus2, a * a)
    outcome.rows.append(run.row("two_point_wald", mean2, a * a, holds2, reps=draws, se=se2))

    records = [{"draw": i + 1, "tau": t, "value": v, "tau_two_point": t2, "value_two_point": v2}
               for i, (t, v, t2, v2) in enumerate(zip(taus, values, taus2, values2))]
    outcome.artifacts.append(str(write_csv(run.path("skorokhod.csv"),
                                           ["draw", "tau", "value", "tau_two_point", "value_two_point"], records)))
    outcome.summary.update({"law": law.describe(), "dt": dt})
    return outcome


def _gap_report(setup: CouplingSetup, m: int, lam: float, seed) -> GapReport:
    state, design = _block_start(setup, m, seed)
    _, _, led_x, led_y = coupled_block(setup, m, state, seed, 1, design)
    return z_statistics(led_x, led_y, lam=lam, c_lambda=1.0)


@experiment_registry.register("coupling-gap",
                              "Fraction of tree cells whose coupled Z gap stays under the calibrated threshold")
def coupling_gap(config: ExperimentConfig, run: RunContext) -> ExperimentOutcome:
    ctx = config.build_context()
    m = int(config.param("m", 1024))
    depth = _tree_depth(config, 6)
    setup = _coupling_setup(ctx, depth)
    plan = setup.plan_for(m)
    fn = partial(_gap_report, setup, m, config.lam)
    outcome = ExperimentOutcome(config.experiment)
    outcome.artifacts.append(str(write_json(run.path("horizons.json"), plan.to_dict())))

    if config.param("calibrate", True):
        pilot = map_replications(fn, replication_seeds(config.seed, "gap_calibration", config.pilot_reps),
                                 workers=config.workers, desc="gap calibration", on_result=run.flush("calibration"))
        c_lambda = calibrate_constant(np.concatenate([r.ratios() for r in pilot]))
        outcome.rows.append(run.row("c_lambda", c_lambda, None, True, n=m, reps=config.pilot_reps))
    else:
        c_lambda = config.c_lambda

    fresh = map_replications(fn, replication_seeds(config.seed, "gap_fresh", config.reps), workers=config.workers,
                             desc="coupling gap", on_result=run.flush("fresh"))
    ratios = np.concatenate([r.ratios() for r in fresh])
    pass_fraction = float(np.mean(ratios <= c_lambda))
    floor = float(config.param("min_pass_fraction", 0.99))
    outcome.rows.append(run.row("pass_fraction", pass_fraction, floor, pass_fraction >= floor, n=m, reps=config.reps))

    fresh[0].c_lambda = c_lambda
    outcome.artifacts.append(str(fresh[0].to_csv(run.path("gap_report.csv"))))
    outcome.summary.update({"c_lambda": c_lambda, "depth": depth, "m": m,
                            "clamped_nodes": len(plan.clamped), "first_report": fresh[0].to_dict()})
    return outcome


def _strong_approx_draw(setup: CouplingSetup, m: int, lam: float, expansion, seed) -> List[Tuple[float, float, bool]]:
    state, design = _block_start(setup, m, seed)
    out = []
    for construction in ("coupled", "independent"):
        _, _, led_x, led_y = coupled_block(setup, m, state, seed, 1, design, construction)
        report = z_statistics(led_x, led_y, lam=lam)
        res = strong_approx_gap(setup.pf, report, expansion, led_x, led_y, lam=lam)
        out.append((res.direct, res.r_n, res.bound_ok))
    return out


@experiment_registry.register("strong-approximation",
                              "Score-sum gap against c(lambda) r_n, coupled versus independent construction")
def strong_approximation(config: ExperimentConfig, run: RunContext) -> ExperimentOutcome:
    ctx = config.build_context()
    m = int(config.param("m", max(partition(ctx.n).sizes)))
    depth = _tree_depth(config, 6)
    setup = _coupling_setup(ctx, depth)
    setup.plan_for(m)
    expansion = haar_expand(ctx.g, config.A, config.B, max(depth - 1, 0))
    fn = partial(_strong_approx_draw, setup, m, config.lam, expansion)
    outcome = ExperimentOutcome(config.experiment)

    if config.param("calibrate", True):
        pilot = map_replications(fn, replication_seeds(config.seed, "strong_calibration", config.pilot_reps),
                                 workers=config.workers, desc="strong calibration", on_result=run.flush("calibration"))
        c_block = calibrate_constant([p[0][0] / p[0][1] for p in pilot])
        outcome.rows.append(run.row("c_block", c_block, None, True, n=m, reps=config.pilot_reps))
    else:
        c_block = config.c_block

    fresh = map_replications(fn, replication_seeds(config.seed, "strong_fresh", config.reps), workers=config.workers,
                             desc="strong approximation", on_result=run.flush("fresh"))
    coupled = np.array([p[0][0] for p in fresh])
    r_n = np.array([p[0][1] for p in fresh])
    independent = np.array([p[1][0] for p in fresh])
    bound_ok = np.array([p[0][2] and p[1][2] for p in fresh])

    exceed = float(np.mean(coupled > c_block * r_n))
    ceiling = float(config.param("max_exceedance", 0.01))
    outcome.rows.append(run.row("exceedance", exceed, ceiling, exceed <= ceiling, n=m, reps=config.reps))
    outcome.rows.append(run.row("decomposition", float(np.mean(bound_ok)), 1.0, bool(np.all(bound_ok)),
                                n=m, reps=config.reps))

    diffs = independent - coupled
    nonzero = int(np.sum(diffs != 0))
    wins = int(np.sum(diffs > 0))
    p_value = stats.binomtest(wins, nonzero, 0.5, alternative="greater").pvalue if nonzero else 1.0
    med_coupled, med_independent = float(np.median(coupled)), float(np.median(independent))
    alpha = float(config.param("sign_test_alpha", 0.01))
    outcome.rows.append(run.row("median_gap", med_coupled, med_independent,
                                med_coupled < med_independent and p_value < alpha, n=m, reps=config.reps))

    records = [{"replication": i + 1, "coupled": c, "independent": d, "r_n": r, "bound_ok": bool(b)}
               for i, (c, d, r, b) in enumerate(zip(coupled, independent, r_n, bound_ok))]
    outcome.artifacts.append(str(write_csv(run.path("strong_approximation.csv"),
                                           ["replication", "coupled", "independent", "r_n", "bound_ok"], records)))
    slope, fisher = sup_slope(ctx.g, config.A, config.B), ctx.noise_p.fisher_info
    outcome.summary.update({"c_block": c_block, "sign_test_p": p_value, "depth": depth, "m": m,
                            "j_star_rule": choose_j_star(m, config.lam, config.A, config.B, slope, fisher),
                            "j_star_required": j_star_required(m, config.lam, config.A, config.B, slope, fisher)})
    return outcome


@experiment_registry.register("hellinger-sweep",
                              "Coupled Hellinger distance between the experiments over a sweep of n")
def hellinger_sweep(config: ExperimentConfig, run: RunContext) -> ExperimentOutcome:
    designs = list(config.param("designs", ["random", "fixed"]))
    depth = _tree_depth(config, 4)
    estimates: Dict[str, List[Any]] = {d: [] for d in designs}
    records: List[Dict[str, Any]] = []
    outcome = ExperimentOutcome(config.experiment)
    for n in config.sizes:
        ctx = config.build_context(n)
        record: Dict[str, Any] = {"n": n}
        for design in designs:
            setup = _coupling_setup(ctx, depth, design)
            setup.prepare(n)
            est = hellinger_mc(partial(coupled_loglr_pair, setup, ctx.psi_f, n, config.construction), config.reps,
                               child_sequence(config.seed, f"sweep_{design}_n{n}"), workers=config.workers,
                               desc=f"hellinger n={n} {design}")
            estimates[design].append(est)
            record.update({f"h2_{design}": est.h2, f"h2_{design}_se": est.h2_se, f"l1_{design}": est.l1,
                           f"tv_{design}_holds": est.tv_bound_holds})
            outcome.rows.append(run.row(f"h2_{design}", est.h2, None, est.tv_bound_holds, n=n, reps=config.reps,
                                        se=est.h2_se))
        records.append(record)
    columns = ["n"] + [c for d in designs for c in (f"h2_{d}", f"h2_{d}_se", f"l1_{d}", f"tv_{d}_holds")]
    outcome.artifacts.append(str(write_csv(run.path("hellinger_sweep.csv"), columns, records)))

    for design in designs:
        ests = estimates[design]
        margins = [a.h2 - b.h2 - 2.0 * math.sqrt(a.h2_se ** 2 + b.h2_se ** 2) for a, b in zip(ests, ests[1:])]
        worst = min(margins) if margins else 0.0
        outcome.rows.append(run.row(f"trend_{design}", worst, 0.0, all(m > 0 for m in margins), reps=config.reps))
    return outcome


@experiment_registry.register("berbee-coupling",
                              "Maximal coupling on an enumerable joint law and the mixing decay of the center chain")
def berbee_coupling(config: ExperimentConfig, run: RunContext) -> ExperimentOutcome:
    joint = np.asarray(config.param("joint", DEFAULT_JOINT), dtype=float)
    draws = int(config.param("draws", 100_000))
    res = berbee_couple(joint, child_sequence(config.seed, "berbee"), draws)
    phi, _ = exact_phi(joint)
    outcome = ExperimentOutcome(config.experiment)
    outcome.rows.append(run.row("mismatch", res.mismatch, phi, res.mismatch_holds, reps=draws, se=res.mismatch_se))
    alpha = float(config.param("alpha", 0.01))
    outcome.rows.append(run.row("independence_p", res.chi2_pvalue, alpha, res.independent(alpha), reps=draws))
    ks_max = float(config.param("ks_max", 0.02))
    outcome.rows.append(run.row("marginal_ks", res.ks, ks_max, res.ks < ks_max, reps=draws))
    outcome.summary["coupling"] = res.to_dict()

    if config.param("mixing", True):
        ctx = config.build_context()
        mix = phi_mixing_chain(ctx.f0, ctx.noise_p, config.param("lags", [1, 2, 3, 4, 5, 6]),
                               cells=int(config.param("cells", 8)), seed=child_sequence(config.seed, "mixing"),
                               steps=int(config.param("chain_steps", 200_000)), sd=ctx.psi_f0)
        outcome.rows.append(run.row("phi_nonincreasing", mix.phi_operator[0], None, mix.nonincreasing()))
        r2_min = float(config.param("r2_min", 0.9))
        r2 = mix.fit.r_squared if mix.fit is not None else 0.0
        outcome.rows.append(run.row("geometric_fit_r2", r2, r2_min, r2 > r2_min))
        outcome.summary["mixing"] = {"rho_hat": mix.fit.rho_hat if mix.fit else None,
                                     "c0_hat": mix.fit.c0_hat if mix.fit else None,
                                     "r_squared": r2}
        outcome.artifacts.append(str(write_json(run.path("phi_mixing.json"), mix.to_dict())))
    return outcome


# bounds

@experiment_registry.register("exp-inequality",
                              "Exponential moment bound for bounded centered laws, exact and Monte Carlo")
def exp_inequality(config: ExperimentConfig, run: RunContext) -> ExperimentOutcome:
    a = float(config.param("a", 1.0))
    lambdas = config.param("lambdas", [-1.0, -0.5, 0.5, 1.0])
    outcome = ExperimentOutcome(config.experiment)
    reports = []
    for spec in bounded_laws(a):
        report = exp_inequality_check(spec, lambdas, config.reps, child_sequence(config.seed, spec.name))
        reports.append(report.to_dict())
        worst = max(((r.exact_lhs if r.exact_lhs is not None else r.lhs) / r.rhs for r in report.rows), default=0.0)
        outcome.rows.append(run.row(spec.name, worst, 1.0, report.holds, reps=config.reps))
    outcome.artifacts.append(str(write_json(run.path("exp_inequality.json"), reports)))
    return outcome


def _tau_sums(ctx: ExperimentContext, law: ScoreLaw, m: int, depth: int, dt: float, seed) -> np.ndarray:
    wf = WienerFamily(child_sequence(seed, "tail"), depth, ctx.config.A, ctx.config.B, dt)
    state = float(sample_stationary(ctx.psi_f0, 1, child_sequence(seed, "state"))[0])
    _, ledger = embed_ar_side(ctx.pf, ctx.noise_p, ctx.psi_f0, m, wf, law=law, x0=state)
    return stopping_time_sums(ledger)


@experiment_registry.register("mixing-tail",
                              "Tail frequencies of interval-localized stopping-time sums of the chain")
def mixing_tail(config: ExperimentConfig, run: RunContext) -> ExperimentOutcome:
    ctx = config.build_context()
    _ = ctx.psi_f0  # solve once before the fan-out
    m = int(config.param("m", 1024))
    depth = _tree_depth(config, 3)
    law = ScoreLaw.from_noise(ctx.noise_p, int(config.param("atoms", COUPLING_CONFIG["score_atoms"])))
    dt = config.dt or default_dt(law)
    sums = np.vstack(map_replications(partial(_tau_sums, ctx, law, m, depth, dt),
                                      replication_seeds(config.seed, "mixing_tail", config.reps),
                                      workers=config.workers, desc="stopping-time sums",
                                      on_result=run.flush("tail")))
    report = mixing_tail_check(sums, m, config.c_lambda, depth)
    outcome = ExperimentOutcome(config.experiment, artifacts=[str(report.to_csv(run.path("mixing_tail.csv")))])
    ceiling = float(config.param("max_frequency", 0.01))
    outcome.rows.append(run.row("exceedance", report.max_frequency, ceiling, report.max_frequency <= ceiling,
                                n=m, reps=config.reps))

    constants = sorted(float(c) for c in config.param("constants", [0.1, 0.25, 0.5, 1.0, 2.0, 4.0]))
    curve = exceedance_curve(sums, m, constants, depth)
    monotone = all(b <= a for a, b in zip(curve, curve[1:]))
    outcome.rows.append(run.row("monotone", float(monotone), 1.0, monotone, n=m, reps=config.reps))
    scaled = mixing_tail_check(sums, m, 10.0 * config.c_lambda, depth).max_frequency
    outcome.rows.append(run.row("scaled_threshold", scaled, 0.0, scaled == 0.0, n=m, reps=config.reps))
    outcome.summary.update({"constants": constants, "curve": curve})
    return outcome


# suite

def _sized_block_pair(setup: CouplingSetup, sizes: Sequence[int], construction: str, l: int, state: float,
                      seed) -> Tuple[float, float]:
    return coupled_block_pair(setup, sizes[l - 1], construction, l, state, seed)


def _remainder_ratio(remainders: np.ndarray, noise, g_sup: float, sizes: Sequence[int]) -> float:
    worst = 0.0
    for rem, m in zip(remainders, sizes):
        bound = remainder_bound(noise, g_sup, m)
        # Gaussian noise has c1 = 0; the remainder is then rounding only
        worst = max(worst, abs(float(rem)) / bound if bound > 0 else (0.0 if abs(rem) < 1e-8 else math.inf))
    return worst


def _event_draw(setup: CouplingSetup, n: int, construction: str, c_event: float, seed):
    """Event diagnostics, worst remainder-to-bound ratio and score exceedance of one coupled replication."""
    pf = setup.pf
    rep = coupled_replication(setup, n, seed, construction)
    part = rep.partition
    first = taylor_terms(rep.trajectory.covariates, rep.trajectory.responses, pf, setup.noise_p, part)
    second = taylor_terms(rep.sample.covariates, rep.sample.y, pf, setup.noise_q, part)
    diag = event_diagnostics(first, second, part, pf.gamma_n, pf.gamma_prime_n, c_event)
    g_sup = pf.g.sup_norm()
    ratio = max(_remainder_ratio(first.remainder, setup.noise_p, g_sup, part.sizes),
                _remainder_ratio(second.remainder, setup.noise_q, g_sup, part.sizes))
    truncation = score_truncation(setup.noise_p, rep.trajectory.eps, n)
    return diag, ratio, truncation["exceed_fraction"]


@experiment_registry.register("lemma-suite",
                              "Blockwise Hellinger, events, Taylor remainders and the auxiliary bounds in one run")
def lemma_suite(config: ExperimentConfig, run: RunContext) -> ExperimentOutcome:
    ctx = config.build_context()
    depth = _tree_depth(config, 3)
    outcome = ExperimentOutcome(config.experiment)

    setup = _coupling_setup(ctx, depth)
    part = setup.prepare(ctx.n)
    states = sample_stationary(ctx.psi_f0, config.conditioning_draws, child_sequence(config.seed, "conditioning"))
    blockwise = lemma31_check(partial(coupled_loglr_pair, setup, ctx.psi_f, ctx.n, config.construction),
                              partial(_sized_block_pair, setup, tuple(part.sizes), config.construction),
                              part.K, states, config.reps, child_sequence(config.seed, "blockwise"),
                              block0=block0_hellinger(ctx.psi_f, ctx.psi_f0), workers=config.workers)
    outcome.rows.append(run.row("blockwise_hellinger", blockwise.lhs, blockwise.rhs, blockwise.holds, n=ctx.n,
                                reps=config.reps, se=blockwise.lhs_se))

    event_reps = int(config.param("event_reps", config.reps))
    c_event = float(config.param("c_event", 1.0))
    events = map_replications(partial(_event_draw, setup, ctx.n, config.construction, c_event),
                              replication_seeds(config.seed, "events", event_reps), workers=config.workers,
                              desc="events", on_result=run.flush("events"))
    freq = event_frequencies([e[0] for e in events], K=part.K)
    outcome.rows.append(run.row("event_frequency", freq["not_a"], freq["one_over_K"],
                                freq["not_a"] <= freq["one_over_K"], n=ctx.n, reps=event_reps))
    worst_remainder = max(e[1] for e in events)
    outcome.rows.append(run.row("taylor_remainder", worst_remainder, 1.0, worst_remainder <= 1.0 + 1e-9, n=ctx.n,
                                reps=event_reps))
    exceed = float(np.mean([e[2] for e in events]))
    outcome.rows.append(run.row("score_truncation", exceed, None, True, n=ctx.n, reps=event_reps))

    expansion = haar_expand(ctx.g, config.A, config.B, depth)
    bounds = coefficient_bounds_check(expansion, ctx.g, config.A, config.B)
    resid = residual_check(expansion, ctx.g)
    outcome.rows.append(run.row("haar_bounds", bounds.max_ratio, 1.0, bounds.ok and resid.ok))

    stationary = lemma61_check(ctx.pf.f, ctx.f0, ctx.noise_p, M=config.M, sd_f=ctx.psi_f, sd_f0=ctx.psi_f0)
    outcome.rows.append(run.row("stationary_hellinger", stationary.lhs, stationary.rhs, stationary.holds))

    draws = int(config.param("draws", 20_000))
    coupling = berbee_couple(np.asarray(DEFAULT_JOINT), child_sequence(config.seed, "berbee"), draws)
    outcome.rows.append(run.row("maximal_coupling", coupling.mismatch, coupling.phi, coupling.mismatch_holds,
                                reps=draws, se=coupling.mismatch_se))

    moment = exp_inequality_check(two_point(1.0), (-1.0, -0.5, 0.5, 1.0), draws, child_sequence(config.seed, "moment"))
    outcome.rows.append(run.row("exponential_moment", max(r.exact_lhs / r.rhs for r in moment.rows), 1.0,
                                moment.holds, reps=draws))

    outcome.summary.update({"blockwise": blockwise.to_dict(), "stationary": stationary.to_dict(),
                            "haar_violations": bounds.violations, "coupling": coupling.to_dict(),
                            "moment": moment.to_dict(), "events": freq, "score_exceed_fraction": exceed,
                            "t2_readings": t2_mean_readings(ctx.g, ctx.psi_f, ctx.psi_f0, ctx.noise_p)})
    outcome.artifacts.append(str(write_json(run.path("lemma_suite.json"), outcome.summary)))
    return outcome
