"""Configuration ingestion, analyze/verify orchestration, and emission.

``run_analyze`` is pure and simulation-free: model constants, kernel
candidates, boundary/marginal/directional classifications, and the
extreme-value scale constants, all deterministic byte-for-byte.

``run_verify`` adds the Monte Carlo side: one main run estimating
local-time rates, balance-identity residuals on the configured argument
grid, tail fits for both axes and every configured direction, dependence
diagnostics, and an occupation histogram; plus an optional second run
collecting sticky-time block maxima for the Gumbel check.  Every verdict
records its named tolerance; exit status is the conjunction.

Reports carry no timestamps, so identical configurations produce
byte-identical output files.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import classify, extremes, fitting, kernel
from .errors import ConfigError, ReflectionNotSubstochastic, StickyTailsError
from .model import ModelParams, local_time_rates, make_model
from .simulate import (
    BlockMaximaObserver,
    JointExceedanceObserver,
    MgfObserver,
    OccupationObserver,
    PathRecorder,
    SimConfig,
    SurvivalObserver,
    bar_residual,
    estimate_local_time_rates,
    run_engine,
    sticky_clock_invert,
)

SCHEMA_VERSION = 1

_TOP_KEYS = {"mu", "sigma", "R", "u", "sim", "directions", "theta_grid", "ev", "output"}
_SIM_KEYS = {"dt", "horizon", "burn_in", "replications", "seed", "thin", "chunk_steps"}
_EV_KEYS = {"blocks", "block_size", "replications", "dt"}
_OUTPUT_KEYS = {"dir", "format"}


@dataclass(frozen=True)
class EvConfig:
    """Budget of the block-maxima run; ``blocks = 0`` disables it."""

    blocks: int = 500
    block_size: float = 1e4
    replications: int = 50
    dt: float | None = None


@dataclass
class RunConfig:
    model: ModelParams
    sim: SimConfig = field(default_factory=SimConfig)
    directions: list = field(default_factory=lambda: [np.array([1.0, 1.0])])
    theta_grid: np.ndarray | None = None
    ev: EvConfig = field(default_factory=EvConfig)
    output_dir: str = "."
    output_format: str = "csv"

    def theta(self) -> np.ndarray:
        if self.theta_grid is not None:
            return self.theta_grid
        g = np.linspace(-2.0, -0.1, 5)
        return np.array([(a, b) for a in g for b in g])


def _require(block: dict, key: str, pointer: str):
    if key not in block:
        raise ConfigError(f"missing required key '{key}'", pointer=pointer)
    return block[key]


def _check_keys(block: dict, allowed: set, pointer: str):
    unknown = set(block) - allowed
    if unknown:
        raise ConfigError(
            f"unknown key(s) {sorted(unknown)}; allowed: {sorted(allowed)}", pointer=pointer
        )


def parse_config(path) -> RunConfig:
    """Strict JSON configuration loader.

    Unknown keys are rejected (typos in mathematical parameters must not
    pass silently); the model block is validated immediately, so an
    unstable or degenerate parameter set fails here.
    """
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", pointer=f"line {exc.lineno} col {exc.colno}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("top level must be an object", pointer="$")
    _check_keys(raw, _TOP_KEYS, "$")

    model = make_model(
        _require(raw, "mu", "$"),
        _require(raw, "sigma", "$"),
        _require(raw, "R", "$"),
        _require(raw, "u", "$"),
    )

    sim_block = raw.get("sim", {})
    _check_keys(sim_block, _SIM_KEYS, "$.sim")
    sim = SimConfig(**sim_block)

    directions = []
    for i, d in enumerate(raw.get("directions", [[1.0, 1.0]])):
        q = classify.DirectionalQuery(np.asarray(d, dtype=float))
        directions.append(q.u_bar)

    theta = None
    if "theta_grid" in raw:
        theta = np.asarray(raw["theta_grid"], dtype=float).reshape(-1, 2)
        if not np.all(theta < 0.0):
            raise ConfigError("all transform arguments must be strictly negative", "$.theta_grid")

    ev_block = raw.get("ev", {})
    _check_keys(ev_block, _EV_KEYS, "$.ev")
    ev = EvConfig(**ev_block)

    out_block = raw.get("output", {})
    _check_keys(out_block, _OUTPUT_KEYS, "$.output")
    fmt = out_block.get("format", "csv")
    if fmt not in ("json", "csv"):
        raise ConfigError("format must be 'json' or 'csv'", "$.output.format")

    return RunConfig(
        model=model,
        sim=sim,
        directions=directions,
        theta_grid=theta,
        ev=ev,
        output_dir=out_block.get("dir", "."),
        output_format=fmt,
    )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return v
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _tail_dict(t: classify.TailAsymptotic) -> dict:
    return {
        "alpha": t.alpha,
        "p": t.p,
        "regime": t.regime,
        "dominant": t.dominant,
        "experimental": t.experimental,
    }


def run_analyze(cfg: RunConfig) -> dict:
    """Simulation-free analytic half of the report."""
    p = cfg.model
    rates = local_time_rates(p)
    cands2 = kernel.singularity_candidates(p)
    cands1 = kernel.singularity_candidates(p.swapped())

    def cand_dict(c: kernel.SingularityCandidates) -> dict:
        return {
            "x_star": c.x_star,
            "y_star": c.y_star,
            "x_tilde": c.x_tilde,
            "x2": c.x2,
            "y2": c.y2,
            "tau": min(c.x_star, c.x_tilde, c.x2),
            "cross_checks": c.cross_check,
        }

    marg1 = classify.classify_marginal(1, p)
    marg2 = classify.classify_marginal(2, p)
    report = {
        "model": p.as_dict(),
        "local_time_rates": {
            "e_T1": rates.e_T1,
            "e_L1": rates.e_L1,
            "e_L2": rates.e_L2,
            "cross_checks": rates.cross_check,
        },
        "faces": {
            "2": {**cand_dict(cands2), "tail": _tail_dict(classify.classify_boundary(2, p))},
            "1": {**cand_dict(cands1), "tail": _tail_dict(classify.classify_boundary(1, p))},
        },
        "marginals": {
            "1": _tail_dict(marg1),
            "2": _tail_dict(marg2),
        },
        "directions": [
            {
                "u_bar": list(map(float, u)),
                "tail": _tail_dict(classify.classify_direction(classify.DirectionalQuery(u), p)),
            }
            for u in cfg.directions
        ],
        "extreme_value_scales": {
            "axis1_a_n": 1.0 / marg1.alpha,
            "axis2_a_n": 1.0 / marg2.alpha,
            "note": "location constants require the simulation-fitted tail coefficient",
        },
    }
    try:
        j1, j2 = classify.joint_tail_params(p)
        report["joint_tail"] = {
            "alpha1": j1.alpha,
            "p1": j1.p,
            "alpha2": j2.alpha,
            "p2": j2.p,
        }
    except ReflectionNotSubstochastic as exc:
        report["joint_tail"] = {"error": "ReflectionNotSubstochastic", "detail": str(exc)}
    return report


def _kernel_selfcheck(p: ModelParams) -> dict:
    """Branch-residual and branch-point oracle checks (cheap, analytic)."""
    bp = kernel.branch_points(p)
    xs = np.linspace(bp.x1, bp.x2, 10_000)
    resid = np.abs(kernel.kernel_eval(xs, kernel.y_branch(xs, 0, p), p))
    scale = 1.0 + xs * xs
    branch_resid = float(np.max(resid / scale))
    # sign-change scan oracle for the discriminant roots, bisection-refined
    kf = kernel.KernelForm.from_params(p)
    grid = np.linspace(-10.0 * abs(bp.x2), 10.0 * abs(bp.x2), 1_000_000)
    d = kf.disc_x(grid)
    flips = np.where(np.sign(d[:-1]) * np.sign(d[1:]) < 0.0)[0]
    scan_roots = []
    for j in flips:
        lo, hi = grid[j], grid[j + 1]
        flo = kf.disc_x(lo)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            fm = kf.disc_x(mid)
            if flo * fm <= 0.0:
                hi = mid
            else:
                lo, flo = mid, fm
        scan_roots.append(0.5 * (lo + hi))
    scan_err = float(
        max(abs(min(scan_roots) - bp.x1), abs(max(scan_roots) - bp.x2))
        if len(scan_roots) >= 2
        else math.inf
    )
    return {"max_branch_residual": branch_resid, "branch_point_scan_error": scan_err}


def _verdict(name: str, value, tolerance, passed: bool, detail: str = "") -> dict:
    return {
        "name": name,
        "pass": bool(passed),
        "value": value,
        "tolerance": tolerance,
        "detail": detail,
    }


@dataclass
class VerificationReport:
    """Analytic and simulated halves plus verdicts and plot payloads."""

    report: dict
    curves: dict = field(default_factory=dict)
    occupation: object = None
    gumbel: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v["pass"] for v in self.report["verdicts"])

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.report), indent=2, sort_keys=True)


def run_verify(cfg: RunConfig) -> VerificationReport:
    """Full verification pipeline: analytic report, Monte Carlo estimates,
    residuals, tail fits, dependence diagnostics, block-maxima check, and
    pass/fail verdicts with named tolerances."""
    p = cfg.model
    analytic = run_analyze(cfg)
    verdicts: list[dict] = []

    kchk = _kernel_selfcheck(p)
    verdicts.append(
        _verdict("kernel_branch_residual", kchk["max_branch_residual"], 1e-10,
                 kchk["max_branch_residual"] < 1e-10)
    )
    verdicts.append(
        _verdict("branch_points_vs_scan", kchk["branch_point_scan_error"], 1e-6,
                 kchk["branch_point_scan_error"] < 1e-6)
    )

    rates_exact = analytic["local_time_rates"]
    alpha1 = analytic["marginals"]["1"]["alpha"]
    alpha2 = analytic["marginals"]["2"]["alpha"]
    p1 = analytic["marginals"]["1"]["p"]
    p2 = analytic["marginals"]["2"]["p"]

    # --- main run -----------------------------------------------------------
    theta = cfg.theta()
    mgf = MgfObserver(theta)
    dir_all = [np.array([1.0, 0.0]), np.array([0.0, 1.0])] + list(cfg.directions)
    dir_alphas = [alpha1, alpha2] + [
        d["tail"]["alpha"] for d in analytic["directions"]
    ]
    dir_powers = [p1, p2] + [d["tail"]["p"] for d in analytic["directions"]]
    edges = [fitting.survival_edges(12.0 * 2.0 / a, 3000) for a in dir_alphas]
    surv = SurvivalObserver(np.array(dir_all), edges)
    t_grid = np.array([1.0, 1.5, 2.0, 2.5, 3.0]) * (2.0 / alpha1)
    joint_pts = [(t, t) for t in t_grid] + [(4.0 / alpha1, 4.0 / alpha2)]
    joint_obs = JointExceedanceObserver(joint_pts)
    occ_obs = OccupationObserver(extent=(7.6 / alpha1, 7.6 / alpha2), bins=400)
    rec = PathRecorder()
    run_engine(p, cfg.sim, observers=(mgf, surv, joint_obs, occ_obs, rec))
    paths = rec.paths()

    # local-time rates
    est = estimate_local_time_rates(paths)
    simulated: dict = {
        "local_time_rates": {
            "e_T1": est.rates.e_T1,
            "e_L1": est.rates.e_L1,
            "e_L2": est.rates.e_L2,
            "se": list(est.se),
        }
    }
    for key in ("e_T1", "e_L1", "e_L2"):
        exact = rates_exact[key]
        got = simulated["local_time_rates"][key]
        rel = abs(got - exact) / abs(exact)
        verdicts.append(_verdict(f"local_time_rate_{key}", rel, 0.05, rel <= 0.05,
                                 f"simulated {got:.6f} vs exact {exact:.6f}"))

    # balance-identity residuals on the argument grid
    residual_rows = []
    worst = 0.0
    for th in theta:
        r = bar_residual(th, mgf.estimate, p)
        residual_rows.append(
            {"theta": list(map(float, th)), "sticky": r.sticky, "srbm": r.srbm}
        )
        worst = max(worst, r.sticky)
    simulated["bar_residuals"] = residual_rows
    verdicts.append(_verdict("bar_residual_max", worst, 0.03, worst < 0.03))

    # tail fits, with the power pinned to the classifier's prediction
    curves = {}
    names = ["axis1", "axis2"] + [
        "dir_" + "_".join(f"{x:g}" for x in u) for u in cfg.directions
    ]
    fits = {}
    for i, name in enumerate(names):
        curve = fitting.curve_from_observer(surv, i)
        curves[name] = curve
        a_ref = dir_alphas[i]
        window = (1.5 * 2.0 / a_ref, 4.0 * 2.0 / a_ref)
        try:
            fit = fitting.survival_and_fit(curve, dir_powers[i], window)
            fits[name] = fit
            rel = abs(fit.alpha - a_ref) / a_ref
            verdicts.append(
                _verdict(f"tail_alpha_{name}", fit.alpha, [0.9 * a_ref, 1.1 * a_ref],
                         rel <= 0.10, f"se {fit.alpha_se:.4f}, window {fit.window}")
            )
            simulated.setdefault("tail_fits", {})[name] = {
                "alpha": fit.alpha,
                "alpha_se": fit.alpha_se,
                "k": fit.k,
                "p_fixed": fit.p,
                "alpha_free": fit.alpha_free,
                "p_free": fit.p_free,
                "window": list(fit.window),
            }
        except StickyTailsError as exc:
            verdicts.append(_verdict(f"tail_alpha_{name}", "unavailable",
                                     [0.9 * a_ref, 1.1 * a_ref], False, str(exc)))

    # dependence diagnostics from clock-inverted stationary samples
    samples = []
    for path in paths:
        spacing = max(4.0 * path.thin * path.dt, 0.05)
        grid = np.arange(spacing, path.total_sticky, spacing)
        samples.append(sticky_clock_invert(path, grid)[1])
    samples = np.vstack(samples)
    try:
        diag = extremes.independence_diagnostic(samples, t_grid)
        simulated["independence"] = {
            "t": diag.t.tolist(),
            "ratio": diag.ratio.tolist(),
            "lower": diag.lower.tolist(),
            "upper": diag.upper.tolist(),
            "decreasing": diag.decreasing,
            "truncated": diag.truncated,
            "n_samples": int(samples.shape[0]),
        }
        verdicts.append(_verdict("independence_decreasing", diag.decreasing, True, diag.decreasing))
        last_ok = diag.ratio[-1] < 0.1 and not diag.truncated
        verdicts.append(_verdict("independence_ratio_at_max", float(diag.ratio[-1]), 0.1, last_ok))
    except StickyTailsError as exc:
        verdicts.append(_verdict("independence_decreasing", "unavailable", True, False, str(exc)))

    # joint product-form factor at the deep point
    jpt = joint_pts[-1]
    tot_w = float(joint_obs.weight_total.sum())
    joint_emp = float(joint_obs.joint[:, -1].sum() / tot_w)
    if "axis1" in fits and "axis2" in fits and joint_emp > 0.0:
        k1 = extremes.fit_tail_coefficient(
            curves["axis1"].t, curves["axis1"].survival,
            classify.TailAsymptotic(alpha1, p1, "marginal", "x_star"),
            fitting.quantile_window(curves["axis1"]),
        )[0]
        k2 = extremes.fit_tail_coefficient(
            curves["axis2"].t, curves["axis2"].survival,
            classify.TailAsymptotic(alpha2, p2, "marginal", "x_star"),
            fitting.quantile_window(curves["axis2"]),
        )[0]
        predicted = (
            k1 * k2 * jpt[0] ** p1 * jpt[1] ** p2
            * math.exp(-alpha1 * jpt[0] - alpha2 * jpt[1])
        )
        factor = joint_emp / predicted
        simulated["joint_tail"] = {
            "point": list(jpt),
            "empirical": joint_emp,
            "product_form": predicted,
            "factor": factor,
            "k1": k1,
            "k2": k2,
        }
        verdicts.append(_verdict("joint_product_factor", factor, [0.5, 2.0],
                                 0.5 <= factor <= 2.0))
    else:
        verdicts.append(_verdict("joint_product_factor", "unavailable", [0.5, 2.0], False,
                                 "no joint exceedances or missing marginal fits"))

    # --- block-maxima run ----------------------------------------------------
    gumbel_payload = {}
    if cfg.ev.blocks > 0:
        gumbel_payload = run_gumbel_check(cfg, alpha_ref=alpha1, p_ref=p1)
        simulated["gumbel"] = {
            k: v for k, v in gumbel_payload.items() if k not in ("normalized", "maxima")
        }
        tol = 0.05 if cfg.ev.blocks >= 500 else 1.63 / math.sqrt(cfg.ev.blocks)
        verdicts.append(
            _verdict("gumbel_ks_distance", gumbel_payload["ks_distance"], tol,
                     gumbel_payload["ks_distance"] < tol,
                     f"{gumbel_payload['n_blocks']} blocks of {cfg.ev.block_size:g}")
        )

    report = {
        "schema_version": SCHEMA_VERSION,
        "seed": cfg.sim.seed,
        "analytic": analytic,
        "simulated": simulated,
        "verdicts": verdicts,
    }
    return VerificationReport(
        report=report,
        curves={name: (curves[name], fits.get(name)) for name in curves},
        occupation=occ_obs.estimate,
        gumbel=gumbel_payload,
    )


def run_gumbel_check(cfg: RunConfig, alpha_ref: float, p_ref: float) -> dict:
    """Dedicated block-maxima run on the first component.

    The block-maxima budget is independent of the main run: shorter burn-in,
    its own replication count, and a derived seed so the two runs never
    share random streams.  Sticky horizon per replication is sized so the
    requested number of completed blocks exists with margin; the tail
    coefficient is refit from this run's own marginal so discretization
    bias cancels between numerator and normalizer.
    """
    p = cfg.model
    blocks = cfg.ev.blocks
    w_sticky = cfg.ev.block_size
    nrep = min(cfg.ev.replications, blocks)
    per_rep = int(math.ceil(blocks / nrep))
    rates = local_time_rates(p)
    sticky_rate = 1.0 / rates.e_T1
    horizon = (per_rep * w_sticky * 1.12) / sticky_rate
    ev_cfg = SimConfig(
        dt=cfg.ev.dt or cfg.sim.dt,
        horizon=horizon,
        burn_in=min(cfg.sim.burn_in, 0.02 * horizon),
        replications=nrep,
        seed=cfg.sim.seed + 1,
        thin=max(1, int(round(1.0 / (cfg.ev.dt or cfg.sim.dt)))),
    )
    bm = BlockMaximaObserver(block_len=w_sticky, max_blocks_per_rep=per_rep)
    hi = 12.0 * 2.0 / alpha_ref
    surv = SurvivalObserver(np.array([[1.0, 0.0]]), [fitting.survival_edges(hi, 3000)])
    run_engine(p, ev_cfg, observers=(bm, surv))

    maxima = bm.block_maxima[:blocks, 0]
    curve = fitting.curve_from_observer(surv, 0)
    tail = classify.TailAsymptotic(alpha_ref, p_ref, "marginal", "x_star")
    window = fitting.quantile_window(curve, 0.90, 0.999)
    k_hat, k_se = extremes.fit_tail_coefficient(curve.t, curve.survival, tail, window)
    norming = extremes.ev_norming(max(int(w_sticky), 3), tail, k_hat)
    normalized = (maxima - norming.b_n) / norming.a_n
    ks = extremes.gumbel_ks_distance(normalized)
    return {
        "n_blocks": int(maxima.size),
        "block_size": w_sticky,
        "k_hat": k_hat,
        "k_hat_window": list(window),
        "a_n": norming.a_n,
        "b_n": norming.b_n,
        "ks_distance": ks,
        "normalized": normalized,
        "maxima": maxima,
    }


# ---------------------------------------------------------------------------
# emission
# ---------------------------------------------------------------------------

def emit(result: VerificationReport, fmt: str, directory) -> list[Path]:
    """Write ``report.json`` and, for ``fmt == 'csv'``, the plot-data files.

    CSV inventory: one ``tails_<name>.csv`` per fitted functional with
    columns ``t, empirical_survival, fitted_survival, lower_ci, upper_ci``;
    ``occupation.csv`` with cell centers and masses; ``gumbel.csv`` with
    the sorted normalized block maxima against the limit law.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    path = directory / "report.json"
    path.write_text(result.to_json() + "\n")
    written.append(path)
    if fmt == "json":
        return written

    for name, (curve, fit) in result.curves.items():
        rows = ["t,empirical_survival,fitted_survival,lower_ci,upper_ci"]
        keep = curve.survival > 0.0
        t = curve.t[keep]
        s = curve.survival[keep]
        if fit is not None:
            fitted = fit.k * np.power(np.maximum(t, 1e-300), fit.p) * np.exp(-fit.alpha * t)
        else:
            fitted = np.full_like(t, math.nan)
        # binomial-style band on the pooled curve, effective count from sticky mass
        n_eff = np.maximum(curve.pooled_weight, 1.0)
        half = 1.96 * np.sqrt(np.maximum(s * (1.0 - s), 0.0) / n_eff)
        for j in range(t.size):
            rows.append(
                f"{t[j]:.9g},{s[j]:.9g},{fitted[j]:.9g},"
                f"{max(s[j] - half[j], 0.0):.9g},{min(s[j] + half[j], 1.0):.9g}"
            )
        fp = directory / f"tails_{name}.csv"
        fp.write_text("\n".join(rows) + "\n")
        written.append(fp)

    occ = result.occupation
    if occ is not None:
        xc = 0.5 * (occ.x_edges[:-1] + occ.x_edges[1:])
        yc = 0.5 * (occ.y_edges[:-1] + occ.y_edges[1:])
        rows = ["x,y,mass"]
        nz = np.argwhere(occ.interior > 0.0)
        for i, j in nz:
            rows.append(f"{xc[i]:.9g},{yc[j]:.9g},{occ.interior[i, j]:.9g}")
        fp = directory / "occupation.csv"
        fp.write_text("\n".join(rows) + "\n")
        written.append(fp)

    if result.gumbel:
        x = np.sort(result.gumbel["normalized"])
        n = x.size
        rows = ["normalized_max,empirical_cdf,gumbel_cdf"]
        for j in range(n):
            rows.append(f"{x[j]:.9g},{(j + 1) / n:.9g},{extremes.gumbel_cdf(x[j]):.9g}")
        fp = directory / "gumbel.csv"
        fp.write_text("\n".join(rows) + "\n")
        written.append(fp)

    return written
