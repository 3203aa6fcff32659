"""Config-driven experiment harness.

Takes a JSON-friendly configuration (distribution, observation model,
hypothesis set, sample-size grid, trial count, master seed), runs the
generate / construct-target / solve pipeline for every (n, trial) cell, and
writes two artifacts into the output directory:

* ``results.csv`` with header
  ``experiment,n,trial,error,rho_hat,dev_hat,objective,converged`` and one
  row per cell, ordered by (n, trial); byte-identical across reruns of the
  same config.
* ``summary.json`` with per-n medians, the fitted log-log decay slope, and
  experiment-specific extras (support-recovery rates, dither levels,
  exact mismatch values, noise decomposition).

Errors are always measured in latent space as ||A^T beta_hat - z_target||;
the adapted-mixing experiment additionally reports ||beta_hat - beta_ref||.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import datagen, geometry, mismatch, solver
from .datagen import (
    GLMLogistic,
    DitheredOneBit,
    LatentDistribution,
    Linear,
    MixingMatrix,
    MultiFn,
    MultiIndex,
    NoisySplit,
    OutputFn,
    SIM,
    Superimposed,
    VariableSelection,
)

EXPERIMENTS = (
    "error_decay",
    "variable_selection",
    "dithering",
    "rademacher_worstcase",
    "noisy_split",
    "adapted_mixing",
    "width_report",
)

CSV_HEADER = "experiment,n,trial,error,rho_hat,dev_hat,objective,converged"


class ConfigError(ValueError):
    """Configuration problem; the message names the offending field."""


@dataclass
class ExperimentConfig:
    experiment: str
    dist: dict
    n_grid: list
    trials: int
    master_seed: int
    output_dir: str
    model: dict | None = None
    hypothesis_set: dict | None = None
    target: object = "auto"
    mixing: dict | None = None
    n_mc: int | None = None
    dithering: dict | None = None
    width: dict | None = None
    adapted: dict | None = None
    solver: dict | None = None

    _FIELDS = (
        "experiment", "dist", "n_grid", "trials", "master_seed", "output_dir",
        "model", "hypothesis_set", "target", "mixing", "n_mc", "dithering",
        "width", "adapted", "solver",
    )

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment: unknown kind {self.experiment!r}; choose from {EXPERIMENTS}")
        if not isinstance(self.dist, dict) or "kind" not in self.dist or "dim" not in self.dist:
            raise ConfigError("dist: need an object with 'kind' and 'dim'")
        ns = [int(n) for n in self.n_grid]
        if len(ns) == 0 or any(b <= a for a, b in zip(ns, ns[1:])):
            raise ConfigError("n_grid: must be a nonempty strictly increasing list")
        self.n_grid = ns
        if int(self.trials) < 1:
            raise ConfigError("trials: must be >= 1")
        self.trials = int(self.trials)
        if int(self.master_seed) < 0:
            raise ConfigError("master_seed: must be a nonnegative integer")
        self.master_seed = int(self.master_seed)
        if self.experiment not in ("width_report", "rademacher_worstcase") and self.model is None:
            raise ConfigError("model: required for this experiment")

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        unknown = set(raw) - set(cls._FIELDS)
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        missing = [k for k in ("experiment", "dist", "n_grid", "trials", "master_seed", "output_dir") if k not in raw]
        if missing:
            raise ConfigError(f"missing required config fields: {missing}")
        return cls(**raw)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        text = Path(path).read_text()
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(raw)


# ---------------------------------------------------------------------------
# Builders from config dictionaries
# ---------------------------------------------------------------------------


def build_dist(spec: dict) -> LatentDistribution:
    try:
        return LatentDistribution(kind=spec["kind"], dim=int(spec["dim"]))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"dist: {exc}") from exc


def _build_output_fn(spec: dict) -> OutputFn:
    return OutputFn(kind=spec["kind"], sigma=float(spec.get("sigma", 0.0)), keep_prob=float(spec.get("keep_prob", 1.0)))


def build_model(spec: dict, d: int):
    try:
        kind = spec["kind"]
        if kind == "linear":
            return Linear(index=spec["index"], noise_sd=float(spec.get("noise_sd", 0.0)))
        if kind == "single_index":
            return SIM(index=spec["index"], g=_build_output_fn(spec["g"]))
        if kind == "dithered_one_bit":
            return DitheredOneBit(index=spec["index"], delta=float(spec.get("delta", 1.0)))
        if kind == "glm_logistic":
            return GLMLogistic(index=spec["index"])
        if kind == "multi_index":
            return MultiIndex(indices=spec["indices"], G=MultiFn(spec["G"]["kind"]))
        if kind == "variable_selection":
            return VariableSelection(active=tuple(spec["active"]), dim=d, G=MultiFn(spec["G"]["kind"]))
        if kind == "superimposed":
            return Superimposed(index=spec["index"], fns=tuple(_build_output_fn(s) for s in spec["fns"]))
        if kind == "noisy_split":
            return NoisySplit(d1=int(spec["d1"]), d2=int(spec["d2"]), G=MultiFn(spec["G"]["kind"]))
        raise ConfigError(f"model.kind: unknown kind {kind!r}")
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"model: {exc}") from exc


def build_mixing(spec: dict | None, d: int) -> MixingMatrix:
    if spec is None or spec.get("kind", "identity") == "identity":
        return MixingMatrix.identity(d)
    try:
        if spec["kind"] == "matrix":
            return MixingMatrix.from_array(spec["entries"])
        if spec["kind"] == "covariance":
            return datagen.isotropic_decomposition(np.asarray(spec["sigma"], dtype=float), rank=spec.get("rank"))
        raise ConfigError(f"mixing.kind: unknown kind {spec['kind']!r}")
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"mixing: {exc}") from exc


def build_hypothesis_set(spec: dict, z_target: np.ndarray | None):
    """Build a hypothesis set; radius 'auto' scales the set to make the target feasible.

    Auto radius is ||z_target||_1 for l1 balls and ||z_target||_2 for l2
    balls, putting the target exactly on the boundary.
    """
    try:
        kind = spec["kind"]
        radius = spec.get("radius", "auto")
        if radius == "auto":
            if z_target is None:
                raise ConfigError("hypothesis_set.radius: 'auto' needs a resolved target vector")
            if kind == "l1_ball":
                radius = float(np.sum(np.abs(z_target)))
            elif kind == "l2_ball":
                radius = float(np.linalg.norm(z_target))
            else:
                raise ConfigError(f"hypothesis_set.radius: 'auto' is not defined for kind {kind!r}")
        if kind == "l1_ball":
            return geometry.L1Ball(radius=float(radius))
        if kind == "l2_ball":
            return geometry.L2Ball(radius=float(radius))
        if kind == "box":
            return geometry.Box(lo=np.asarray(spec["lo"], dtype=float), hi=np.asarray(spec["hi"], dtype=float))
        if kind == "subspace":
            return geometry.Subspace(basis=np.asarray(spec["basis"], dtype=float), radius=spec.get("radius"))
        raise ConfigError(f"hypothesis_set.kind: unknown kind {kind!r}")
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"hypothesis_set: {exc}") from exc


def _solver_config(cfg: ExperimentConfig) -> solver.SolverConfig:
    spec = cfg.solver or {}
    return solver.SolverConfig(
        max_iters=int(spec.get("max_iters", 5000)),
        rel_tol=float(spec.get("rel_tol", 1e-9)),
        seed=int(spec.get("seed", 0)),
    )


def cell_seed(master_seed: int, n: int, trial: int) -> int:
    """Derived seed for one (n, trial) cell; independent of the grid layout."""
    return int(np.random.SeedSequence([master_seed, n, trial]).generate_state(1, np.uint64)[0])


# ---------------------------------------------------------------------------
# Reporting helpers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SlopeFit:
    """Least-squares slope of log(median error) against log(n)."""

    slope: float
    half_width: float
    defined: bool


def fit_decay_slope(points) -> SlopeFit:
    """OLS slope on log-log points; half_width is two slope standard errors.

    Points with a non-positive error (exact recovery) make the log
    undefined; the fit is then flagged as undefined instead of raising.
    """
    pts = [(float(n), float(e)) for n, e in points]
    if len(pts) < 3:
        raise ValueError(f"need at least 3 points to fit a slope, got {len(pts)}")
    if any(e <= 0.0 for _, e in pts):
        return SlopeFit(slope=float("nan"), half_width=float("nan"), defined=False)
    x = np.log([n for n, _ in pts])
    y = np.log([e for _, e in pts])
    xc = x - x.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ y) / sxx
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    dof = max(len(pts) - 2, 1)
    stderr = math.sqrt(float(resid @ resid) / dof / sxx)
    return SlopeFit(slope=slope, half_width=2.0 * stderr, defined=True)


def top_k_support(z, k: int):
    """0-based indices of the k largest |z_i|, ties broken by lowest index."""
    z = np.asarray(z, dtype=float).ravel()
    if not 1 <= k <= z.size:
        raise ValueError(f"k must satisfy 1 <= k <= {z.size}, got {k}")
    order = np.argsort(-np.abs(z), kind="stable")
    return tuple(sorted(int(i) for i in order[:k]))


def _median(values) -> float:
    return float(np.median(np.asarray(values, dtype=float)))


# ---------------------------------------------------------------------------
# Target resolution
# ---------------------------------------------------------------------------


def resolve_target(cfg: ExperimentConfig, model, dist: LatentDistribution, A: MixingMatrix, K):
    """The latent-space vector the run measures its error against.

    'auto' applies the per-family bias-minimizing construction; an explicit
    list is used as-is. Returns (z_target, info) where info lands in
    summary.json.
    """
    if cfg.target != "auto":
        z = np.asarray(cfg.target, dtype=float).ravel()
        return z, {"target_mode": "explicit"}
    info = {"target_mode": "auto"}
    if isinstance(model, (Linear, SIM, GLMLogistic)):
        tv = mismatch.target_single_index(model, dist, n_mc=cfg.n_mc, seed=cfg.master_seed)
        info["mu"] = tv.mu
        return tv.z, info
    if isinstance(model, DitheredOneBit):
        return model.index.copy(), info
    if isinstance(model, (MultiIndex, VariableSelection)):
        tv = mismatch.target_multi_index(model, dist, n_mc=cfg.n_mc, seed=cfg.master_seed)
        info["mu"] = [float(m) for m in np.atleast_1d(tv.mu)]
        return tv.z, info
    if isinstance(model, Superimposed):
        tv = mismatch.target_superimposed(model, dist)
        info["mu"] = tv.mu
        return tv.z, info
    if isinstance(model, NoisySplit):
        if K is None:
            raise ConfigError("hypothesis_set: required (with an explicit radius) for noisy_split targets")
        corr_v = mismatch.exact_output_correlation(model, dist)[: model.d1]
        A_v = A.entries[:, : model.d1]
        A_n = A.entries[:, model.d1 :]
        npr = mismatch.noise_power_target(A_v, A_n, K, corr_v)
        info["noise_norm"] = float(np.linalg.norm(npr.z_n))
        info["fiber_residual"] = npr.residual
        return np.concatenate([corr_v, npr.z_n]), info
    raise ConfigError(f"model: no automatic target construction for {type(model).__name__}")


# ---------------------------------------------------------------------------
# The experiment driver
# ---------------------------------------------------------------------------


def _format_row(experiment, n, trial, error, rho_hat, dev_hat, objective, converged) -> str:
    return ",".join(
        [
            experiment,
            str(n),
            str(trial),
            repr(float(error)),
            repr(float(rho_hat)),
            repr(float(dev_hat)),
            repr(float(objective)),
            str(bool(converged)).lower(),
        ]
    )


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Run all (n, trial) cells of the configured experiment.

    Writes results.csv and summary.json into cfg.output_dir and returns the
    summary dictionary. Deterministic given the config: cell seeds derive
    from (master_seed, n, trial) only. Solver non-convergence is recorded
    per cell, never fatal.
    """
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if cfg.experiment == "width_report":
        summary = _width_report(cfg)
        rows = []
    else:
        rows, summary = _run_cells(cfg)

    csv_path = out_dir / "results.csv"
    with open(csv_path, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for row in rows:
            fh.write(row + "\n")
    summary_path = out_dir / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def _run_cells(cfg: ExperimentConfig):
    dist = build_dist(cfg.dist)
    d = dist.dim
    A = build_mixing(cfg.mixing, d)
    scfg = _solver_config(cfg)

    extras: dict = {}
    if cfg.experiment == "rademacher_worstcase":
        model, z_target, K, extras = _worstcase_setup(cfg, dist)
    else:
        model = build_model(cfg.model, d)
        if cfg.target != "auto":
            z_target, extras = resolve_target(cfg, model, dist, A, None)
            K = build_hypothesis_set(cfg.hypothesis_set, z_target) if cfg.hypothesis_set else None
        elif isinstance(model, NoisySplit):
            # The noise-power target minimizes over the hypothesis set, so
            # the set must be buildable before the target (explicit radius).
            K = build_hypothesis_set(cfg.hypothesis_set, None) if cfg.hypothesis_set else None
            z_target, extras = resolve_target(cfg, model, dist, A, K)
        else:
            z_target, extras = resolve_target(cfg, model, dist, A, None)
            K = build_hypothesis_set(cfg.hypothesis_set, z_target) if cfg.hypothesis_set else None
        if K is None:
            raise ConfigError("hypothesis_set: required for solver-based experiments")

    adapted_spec = cfg.adapted or {}
    A_tilde = None
    if cfg.experiment == "adapted_mixing":
        A_tilde = _perturbed_mixing(A.entries, adapted_spec, cfg.master_seed)
        extras["mixing_perturbation"] = float(adapted_spec.get("perturbation", 0.0))

    if cfg.experiment == "dithering" and not isinstance(model, DitheredOneBit):
        raise ConfigError("model: the dithering experiment needs a dithered_one_bit model")
    dith = cfg.dithering or {}
    kappa = float(dith.get("kappa", dist.subgaussian_constant))
    lam = float(dith.get("lam", 1.0))
    dses = float(dith.get("C", 1.0))

    rows = []
    records = {n: [] for n in cfg.n_grid}
    for n in cfg.n_grid:
        model_n = model
        if cfg.experiment == "dithering":
            delta = datagen.dithering_scale(kappa, lam, n, dses)
            model_n = DitheredOneBit(index=model.index, delta=delta)
        for trial in range(cfg.trials):
            seed = cell_seed(cfg.master_seed, n, trial)
            ss = datagen.build_sample_set(dist, model_n, n, seed, A)
            if cfg.experiment == "adapted_mixing":
                fit = solver.solve_adapted(ss.inputs, ss.outputs, A_tilde, K, scfg)
                z_hat = fit.z_hat
            else:
                fit = solver.solve_klasso(ss.inputs, ss.outputs, K, scfg)
                z_hat = solver.pushforward_estimate(A, fit)
            error = float(np.linalg.norm(z_hat - z_target))
            rho_hat = mismatch.mismatch_covariance(ss.latent, ss.outputs, z_target)
            dev_hat = mismatch.mismatch_deviation(ss.latent, ss.outputs, z_target) if n >= 100 else float("nan")
            rows.append(_format_row(cfg.experiment, n, trial, error, rho_hat, dev_hat, fit.objective, fit.converged))
            rec = {"error": error, "rho_hat": rho_hat, "z_hat": z_hat, "fit": fit, "sample": ss, "model": model_n}
            records[n].append(rec)

    summary = _summarize(cfg, dist, A, K, z_target, records, extras, A_tilde)
    return rows, summary


def _worstcase_setup(cfg: ExperimentConfig, dist: LatentDistribution):
    """Sign observations that cannot distinguish two sparse index vectors."""
    if dist.kind != "rademacher" or dist.dim < 2:
        raise ConfigError("dist: rademacher_worstcase needs rademacher factors with dim >= 2")
    d = dist.dim
    z_plain = np.zeros(d)
    z_plain[0] = 1.0
    z_biased = z_plain.copy()
    z_biased[1] = 0.5
    model = SIM(index=z_biased, g=OutputFn("sign"))
    K = build_hypothesis_set(cfg.hypothesis_set, z_biased) if cfg.hypothesis_set else geometry.L2Ball(
        radius=float(np.linalg.norm(z_biased))
    )
    extras = {
        "worstcase_targets": [z_plain.tolist(), z_biased.tolist()],
        "worstcase_rho_exact": [
            mismatch.mismatch_covariance_exact(model, dist, z_plain),
            mismatch.mismatch_covariance_exact(model, dist, z_biased),
        ],
        "target_mode": "worstcase_biased",
    }
    return model, z_biased, K, extras


def _perturbed_mixing(A_entries: np.ndarray, spec: dict, master_seed: int) -> np.ndarray:
    rel = float(spec.get("perturbation", 0.0))
    if rel == 0.0:
        return A_entries.copy()
    rng = np.random.default_rng(cell_seed(master_seed, 0, int(spec.get("seed", 0))))
    Q = rng.standard_normal(A_entries.shape)
    Q *= rel * solver.spectral_norm(A_entries) / solver.spectral_norm(Q)
    return A_entries + Q


def _summarize(cfg, dist, A, K, z_target, records, extras, A_tilde):
    medians = {str(n): _median([r["error"] for r in records[n]]) for n in cfg.n_grid}
    rho_medians = {str(n): _median([r["rho_hat"] for r in records[n]]) for n in cfg.n_grid}
    summary = {
        "experiment": cfg.experiment,
        "n_grid": cfg.n_grid,
        "trials": cfg.trials,
        "master_seed": cfg.master_seed,
        "target": np.asarray(z_target, dtype=float).tolist(),
        "lambda": _set_scale(K),
        "error_medians": medians,
        "rho_hat_medians": rho_medians,
        **extras,
    }
    if len(cfg.n_grid) >= 3:
        fit = fit_decay_slope([(n, medians[str(n)]) for n in cfg.n_grid])
        summary["slope"] = fit.slope if fit.defined else None
        summary["slope_half_width"] = fit.half_width if fit.defined else None
        summary["slope_defined"] = fit.defined

    if cfg.experiment == "variable_selection":
        active = tuple(records[cfg.n_grid[0]][0]["model"].active)
        rates = {}
        for n in cfg.n_grid:
            hits = [top_k_support(r["z_hat"], len(active)) == active for r in records[n]]
            rates[str(n)] = float(np.mean(hits))
        summary["support_recovery_rate"] = rates
    elif cfg.experiment == "dithering":
        ratios, deltas = {}, {}
        for n in cfg.n_grid:
            delta = records[n][0]["model"].delta
            deltas[str(n)] = delta
            ratios[str(n)] = _median([r["rho_hat"] * math.sqrt(n) / delta for r in records[n]])
        summary["delta"] = deltas
        summary["rho_sqrt_n_over_delta_medians"] = ratios
    elif cfg.experiment == "noisy_split":
        model = records[cfg.n_grid[0]][0]["model"]
        resids = {}
        for n in cfg.n_grid:
            vals = [
                mismatch.mismatch_decomposition(model, z_target, latent=r["sample"].latent, outputs=r["sample"].outputs).residual
                for r in records[n]
            ]
            resids[str(n)] = _median(vals)
        summary["decomposition_residual_medians"] = resids
    elif cfg.experiment == "adapted_mixing":
        beta_ref = solver.adapted_reference_beta(A.entries, A_tilde, z_target)
        beta_err = {
            str(n): _median([float(np.linalg.norm(r["fit"].beta_hat - beta_ref)) for r in records[n]])
            for n in cfg.n_grid
        }
        summary["beta_error_medians"] = beta_err
    return summary


def _set_scale(K) -> float | None:
    if isinstance(K, (geometry.L1Ball, geometry.L2Ball)):
        return float(K.radius)
    if isinstance(K, geometry.Subspace):
        return None if K.radius is None else float(K.radius)
    return None


def _width_report(cfg: ExperimentConfig) -> dict:
    spec = cfg.width or {}
    if cfg.hypothesis_set is None:
        raise ConfigError("hypothesis_set: required for width_report")
    d = int(build_dist(cfg.dist).dim)
    K = build_hypothesis_set(cfg.hypothesis_set, None)
    n_mc = int(spec.get("n_mc", 20000))
    widths = {"global": geometry.mean_width_global(K, d, n_mc=n_mc, seed=cfg.master_seed).to_json()}
    if "conic" in spec:
        widths["conic_l1"] = geometry.conic_width_l1_descent(d, int(spec["conic"]["s"])).to_json()
    if "local" in spec:
        widths["local_bound"] = geometry.local_width_bound(
            K, np.asarray(spec["local"]["z"], dtype=float), float(spec["local"]["t"]), n_mc=n_mc, seed=cfg.master_seed
        ).to_json()
    return {
        "experiment": cfg.experiment,
        "n_grid": cfg.n_grid,
        "trials": cfg.trials,
        "master_seed": cfg.master_seed,
        "widths": widths,
    }
