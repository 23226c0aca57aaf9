"""Experiment runners: model fitting, jet estimation, diagnostics, reports.

Each experiment is driven by an ExperimentConfig (JSON-serializable, fully
seeded) and produces an ExperimentReport that can be written as report.json
plus plot-ready CSV files. Two runs with the same config are byte-identical
up to wall-time fields.
"""

from __future__ import annotations

import os
import tempfile
import time
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import serialize
from ._version import __version__
from .data import (
    gen_latent_regression,
    gen_linreg,
    gen_mixture_classification,
    gen_synthetic_digits,
    load_digits,
    write_digits_csv,
)
from .diagnostics import (
    CostCounters,
    DiagnosticsReport,
    FixedDimension,
    aggregate,
    jet_sim,
    numerical_rank,
    select_k_variance,
)
from .errors import ConfigError
from .jets import (
    FixedRidge,
    ScaleAwareRidge,
    ZeroRidge,
    estimate_jets_over_bases,
)
from .numerics import STREAM_BASES, STREAM_PROBES, RngStream
from .pipeline import Identity, Linear, Pipeline
from .probes import Isotropic, SubspaceAligned
from .training import (
    Dataset,
    TrainConfig,
    classification_error,
    fit_logistic,
    fit_ols,
    fit_pca,
    regression_mse,
    train_mlp,
)

EXPERIMENT_NAMES = (
    "linreg",
    "deep_regressor",
    "pipeline_classification",
    "digits",
    "sweep_eps",
    "sweep_probes",
    "sweep_k",
    "cost",
)

# Paper-style epsilon grid, stored sorted ascending.
DEFAULT_EPS_GRID = (10**-3.5, 1e-3, 1e-2, 10**-1.5, 1e-1)
DEFAULT_PROBE_GRID = (8, 16, 32, 64)


@dataclass
class ExperimentConfig:
    """Knobs for one experiment run. Unused fields are ignored by runners."""

    experiment: str
    seed: int = 0
    out_dir: str | None = None
    # sizes
    n_train: int = 1000
    n_test: int = 200
    d: int = 10
    k: int = 3
    n_classes: int = 3
    s_bases: int = 20
    # probes
    n_probes: int = 32
    eps: float = 1e-2
    resample_probes: bool = True
    # ridge policy: "scale_aware" | "fixed" | "zero"
    ridge: str = "scale_aware"
    ridge_alpha: float = 1e-3
    ridge_lambda: float = 0.0
    # diagnostics
    rank_tol_rel: float = 1e-6
    retain_rho: float = 0.95
    theta_hi: float = 0.95
    theta_lo: float = 0.7
    # data-generation knobs
    noise_sigma: float = 0.1
    noise_x: float = 0.1
    noise_y: float = 0.02
    quad_coeff: float = 0.2
    class_sep: float = 2.2
    latent_sigma: float = 1.0
    # training
    epochs: int = 800
    step_size: float = 0.5
    init_scale_b: float = 0.25
    hidden: int = 32
    pca_k: int = 10
    # digits data
    digits_csv: str | None = None
    synthetic_per_class: int = 125
    # sweeps and cost accounting
    eps_grid: tuple = DEFAULT_EPS_GRID
    probe_grid: tuple = DEFAULT_PROBE_GRID
    k_grid: tuple = tuple(range(1, 13))
    n_jet: int = 200
    cost_probe_counts: tuple = (32, 64)
    parallel: bool = False

    def __post_init__(self):
        if self.experiment not in EXPERIMENT_NAMES:
            raise ConfigError(
                f"unknown experiment {self.experiment!r}; "
                f"expected one of {', '.join(EXPERIMENT_NAMES)}"
            )
        for name in ("n_train", "n_test", "d", "k", "n_classes", "s_bases",
                     "n_probes", "epochs", "hidden", "pca_k", "n_jet"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.eps <= 0 or self.step_size <= 0:
            raise ConfigError("eps and step_size must be positive")
        if self.ridge not in ("scale_aware", "fixed", "zero"):
            raise ConfigError(f"unknown ridge policy {self.ridge!r}")

    def to_json_dict(self) -> dict:
        doc = asdict(self)
        for key in ("eps_grid", "probe_grid", "k_grid", "cost_probe_counts"):
            doc[key] = list(doc[key])
        return doc

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "experiment" not in doc:
            raise ConfigError("config must name an experiment")
        base = default_config(doc["experiment"])
        values = dict(doc)
        for key in ("eps_grid", "probe_grid", "k_grid", "cost_probe_counts"):
            if key in values:
                values[key] = tuple(values[key])
        try:
            return replace(base, **values)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc


def default_config(experiment: str) -> ExperimentConfig:
    """Per-experiment defaults matching the reference setups."""
    if experiment == "linreg":
        return ExperimentConfig(
            experiment, n_train=1000, n_test=200, d=10, s_bases=20,
            eps=1e-3, ridge="zero", noise_sigma=0.1,
        )
    if experiment == "deep_regressor":
        return ExperimentConfig(
            experiment, n_train=1000, n_test=400, d=8, k=3, s_bases=50,
            eps=1e-2, rank_tol_rel=0.1, epochs=2500, step_size=0.5,
            noise_x=0.1, noise_y=0.02, quad_coeff=0.2,
        )
    if experiment == "pipeline_classification":
        return ExperimentConfig(
            experiment, n_train=1500, n_test=600, d=20, k=3, n_classes=3,
            s_bases=50, eps=1e-2, epochs=800, class_sep=2.2, noise_x=0.3,
        )
    if experiment == "digits":
        return ExperimentConfig(
            experiment, d=64, k=10, pca_k=10, s_bases=50, eps=1e-2,
            epochs=600, hidden=32,
        )
    if experiment in ("sweep_eps", "sweep_probes", "sweep_k"):
        return ExperimentConfig(
            experiment, d=64, k=10, pca_k=10, s_bases=30, eps=1e-2,
            epochs=600, hidden=32,
        )
    if experiment == "cost":
        return ExperimentConfig(
            experiment, d=64, k=10, pca_k=10, eps=1e-2, epochs=600,
            hidden=32, n_jet=200,
        )
    raise ConfigError(f"unknown experiment {experiment!r}")


def _ridge_policy(cfg: ExperimentConfig):
    if cfg.ridge == "zero":
        return ZeroRidge()
    if cfg.ridge == "fixed":
        return FixedRidge(cfg.ridge_lambda)
    return ScaleAwareRidge(cfg.ridge_alpha)


@dataclass
class ExperimentReport:
    config: dict
    risk: dict
    extras: dict = field(default_factory=dict)
    diagnostics: DiagnosticsReport | None = None
    tables: dict = field(default_factory=dict)
    wall_time: float = 0.0
    provenance: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "config": self.config,
            "risk": self.risk,
            "extras": self.extras,
            "diagnostics": None
            if self.diagnostics is None
            else self.diagnostics.to_json_dict(),
            "tables": self.tables,
            "wall_time": self.wall_time,
            "provenance": self.provenance,
        }

    def write(self, out_dir, plot_data: bool = False) -> None:
        os.makedirs(out_dir, exist_ok=True)
        serialize.dump_json(os.path.join(out_dir, "report.json"), self.to_json_dict())
        if self.diagnostics is not None:
            self.diagnostics.write_ranks_csv(os.path.join(out_dir, "ranks.csv"))
            self.diagnostics.write_jetsim_csv(os.path.join(out_dir, "jetsim.csv"))
        if "sweep" in self.tables:
            rows = self.tables["sweep"]
            serialize.write_csv(
                os.path.join(out_dir, "sweep.csv"),
                ("value", "mean_jetsim", "mean_rank"),
                [(r["value"], r["mean_jetsim"], r["mean_rank"]) for r in rows],
            )
        if "cost" in self.tables:
            rows = self.tables["cost"]
            serialize.write_csv(
                os.path.join(out_dir, "cost.csv"),
                ("n_jet", "probes", "taps", "time_s", "fwd_passes"),
                [
                    (r["n_jet"], r["probes"], r["taps"], r["time_s"], r["fwd_passes"])
                    for r in rows
                ],
            )
        if plot_data:
            self._write_plot_data(out_dir)

    def _write_plot_data(self, out_dir) -> None:
        rows = []
        if self.diagnostics is not None:
            for tap, results in self.diagnostics.ranks.items():
                for base_id, r in enumerate(results):
                    rows.append(("rank", tap, float(base_id), float(r.rank)))
            for pair, results in self.diagnostics.jetsim.items():
                name = "|".join(pair)
                for base_id, r in enumerate(results):
                    rows.append(("jetsim", name, float(base_id), r.score))
        for r in self.tables.get("sweep", []):
            rows.append(("sweep_jetsim", self.config["experiment"], r["value"], r["mean_jetsim"]))
            rows.append(("sweep_rank", self.config["experiment"], r["value"], r["mean_rank"]))
        for r in self.tables.get("cost", []):
            rows.append(("cost_fwd_passes", self.config["experiment"], float(r["probes"]), float(r["fwd_passes"])))
        serialize.write_csv(
            os.path.join(out_dir, "plotdata.csv"),
            ("metric", "group", "x", "value"),
            rows,
        )


def strip_timing_fields(doc):
    """Remove wall-time entries so reports can be compared across runs."""
    if isinstance(doc, dict):
        return {
            k: strip_timing_fields(v)
            for k, v in doc.items()
            if k not in ("wall_time", "time_s")
        }
    if isinstance(doc, list):
        return [strip_timing_fields(v) for v in doc]
    return doc


def _provenance(cfg: ExperimentConfig) -> dict:
    return {"artifact": "mojet", "version": __version__, "seed": cfg.seed}


def _pick_bases(test: Dataset, cfg: ExperimentConfig, count: int | None = None) -> np.ndarray:
    count = cfg.s_bases if count is None else count
    if count > test.n:
        raise ConfigError(
            f"requested {count} base points but the test split has {test.n}"
        )
    g = RngStream(cfg.seed, STREAM_BASES).generator()
    idx = g.choice(test.n, size=count, replace=False)
    return test.X[idx]


def _workers(cfg: ExperimentConfig) -> int | None:
    return 4 if cfg.parallel else None


def _two_model_diagnostics(
    cfg: ExperimentConfig,
    models: list[tuple[str, Pipeline, str]],
    families: dict,
    bases: np.ndarray,
    reference_label: str,
):
    """Jets, ranks and cross-model similarity for each probe family.

    The retained subspace dimension per family comes from the variance rule
    applied to the reference model's jets of that family. Within one family
    both models see the same probe stream, so their probe batches coincide.
    """
    ridge = _ridge_policy(cfg)
    probes_rng = RngStream(cfg.seed, STREAM_PROBES)
    cost = CostCounters()
    ranks: dict = {}
    sims: dict = {}
    retained: dict = {}
    all_jets: dict = {}
    t0 = time.perf_counter()
    for fam_idx, (family, design) in enumerate(families.items()):
        fam_rng = probes_rng.child(fam_idx)
        jets_by_label = {}
        for label, pipe, tap in models:
            before = pipe.read_counter()
            jets = estimate_jets_over_bases(
                pipe,
                tap,
                bases,
                design,
                fam_rng,
                ridge=ridge,
                resample_per_base=cfg.resample_probes,
                max_workers=_workers(cfg),
            )
            used = pipe.read_counter() - before
            cost.base_passes += len(bases)
            cost.probe_passes += used - len(bases)
            jets_by_label[label] = jets
            ranks[f"{family}/{label}"] = [
                numerical_rank(j.jacobian, cfg.rank_tol_rel) for j in jets
            ]
            all_jets[(family, label)] = jets
        k_ret = select_k_variance(jets_by_label[reference_label], cfg.retain_rho)
        retained[family] = k_ret
        retain = FixedDimension(k_ret)
        labels = [m[0] for m in models]
        for i in range(len(labels)):
            for j in range(i + 1, len(labels)):
                pair = (f"{family}/{labels[i]}", f"{family}/{labels[j]}")
                sims[pair] = [
                    jet_sim(ja.jacobian, jb.jacobian, retain)
                    for ja, jb in zip(jets_by_label[labels[i]], jets_by_label[labels[j]])
                ]
    cost.wall_time = time.perf_counter() - t0
    report = aggregate(
        ranks, sims, cost=cost, theta_hi=cfg.theta_hi, theta_lo=cfg.theta_lo
    )
    return report, retained, all_jets


# --- individual experiments -------------------------------------------------


def _run_linreg(cfg: ExperimentConfig) -> ExperimentReport:
    train, test, beta_star = gen_linreg(
        cfg.seed, cfg.n_train, cfg.n_test, cfg.d, cfg.noise_sigma
    )
    beta_hat = fit_ols(train)
    pipe = Pipeline(
        [Identity(), Linear(beta_hat[None, :])],
        taps=[("input", 0), ("output", 1)],
        input_dim=cfg.d,
    )
    test_mse = float(np.mean((test.X @ beta_hat - test.y) ** 2))
    bases = _pick_bases(test, cfg)
    design = Isotropic(cfg.eps, cfg.n_probes)
    ridge = _ridge_policy(cfg)
    probes_rng = RngStream(cfg.seed, STREAM_PROBES)
    cost = CostCounters()
    jets = {}
    for tap in ("output", "input"):
        before = pipe.read_counter()
        jets[tap] = estimate_jets_over_bases(
            pipe, tap, bases, design, probes_rng,
            ridge=ridge, resample_per_base=cfg.resample_probes,
            max_workers=_workers(cfg),
        )
        used = pipe.read_counter() - before
        cost.base_passes += len(bases)
        cost.probe_passes += used - len(bases)
    ranks = {
        tap: [numerical_rank(j.jacobian, cfg.rank_tol_rel) for j in js]
        for tap, js in jets.items()
    }
    diagnostics = aggregate(ranks, {}, cost=cost, theta_hi=cfg.theta_hi, theta_lo=cfg.theta_lo)
    grad_mean = np.mean([j.jacobian[0] for j in jets["output"]], axis=0)
    rmse_vs_ols = float(np.sqrt(np.mean((grad_mean - beta_hat) ** 2)))
    rmse_vs_true = float(np.sqrt(np.mean((grad_mean - beta_star) ** 2)))
    return ExperimentReport(
        config=cfg.to_json_dict(),
        risk={"test_mse": test_mse, "noise_sigma": cfg.noise_sigma},
        extras={
            "beta_hat": serialize.vector_to_list(beta_hat),
            "beta_star": serialize.vector_to_list(beta_star),
            "jet_gradient_mean": serialize.vector_to_list(grad_mean),
            "jet_vs_ols_rmse": rmse_vs_ols,
            "jet_vs_true_rmse": rmse_vs_true,
        },
        diagnostics=diagnostics,
        provenance=_provenance(cfg),
    )


def _deep_regressor_models(cfg: ExperimentConfig, train: Dataset):
    arch_a = (("linear", cfg.k, "bottleneck"), ("tanh",), ("linear", 16), ("tanh",))
    result_a = train_mlp(
        train,
        TrainConfig(
            epochs=cfg.epochs, step_size=cfg.step_size, seed=cfg.seed,
            architecture=arch_a,
        ),
    )
    arch_b = (
        ("linear", cfg.d),
        ("linear", cfg.k, "bottleneck"),
        ("linear", cfg.k),
        ("tanh",),
        ("linear", 16),
        ("tanh",),
    )
    result_b = train_mlp(
        train,
        TrainConfig(
            epochs=cfg.epochs, step_size=cfg.step_size, seed=cfg.seed + 1,
            architecture=arch_b, init_scale=cfg.init_scale_b,
        ),
    )
    return result_a, result_b


def _run_deep_regressor(cfg: ExperimentConfig) -> ExperimentReport:
    train, test, _info = gen_latent_regression(
        cfg.seed, cfg.n_train, cfg.n_test, cfg.d, cfg.k,
        cfg.noise_x, cfg.noise_y, cfg.quad_coeff,
    )
    result_a, result_b = _deep_regressor_models(cfg, train)
    pca = fit_pca(train, cfg.k)
    bases = _pick_bases(test, cfg)
    families = {
        "coarse": Isotropic(cfg.eps, cfg.n_probes),
        "structured": SubspaceAligned(pca.components, cfg.eps, cfg.n_probes),
    }
    models = [
        ("model_a", result_a.pipeline, "bottleneck"),
        ("model_b", result_b.pipeline, "bottleneck"),
    ]
    diagnostics, retained, _ = _two_model_diagnostics(
        cfg, models, families, bases, reference_label="model_a"
    )
    return ExperimentReport(
        config=cfg.to_json_dict(),
        risk={
            "test_mse_model_a": regression_mse(result_a.pipeline, test),
            "test_mse_model_b": regression_mse(result_b.pipeline, test),
        },
        extras={"retained_k": retained},
        diagnostics=diagnostics,
        provenance=_provenance(cfg),
    )


def _pca_logistic_pipeline(cfg, train, k, tap_id):
    pca = fit_pca(train, k)
    scores = Dataset(
        (train.X - pca.mean) @ pca.components.T, train.y, "classification", "train"
    )
    head = fit_logistic(
        scores,
        TrainConfig(epochs=cfg.epochs, step_size=cfg.step_size, seed=cfg.seed + 2),
    )
    return pca, Pipeline([pca, head], taps=[(tap_id, 0)])


def _run_pipeline_classification(cfg: ExperimentConfig) -> ExperimentReport:
    train, test, _info = gen_mixture_classification(
        cfg.seed, cfg.n_train, cfg.n_test, cfg.d, cfg.k, cfg.n_classes,
        cfg.class_sep, cfg.latent_sigma, cfg.noise_x,
    )
    pca, pipe_pca = _pca_logistic_pipeline(cfg, train, cfg.k, "pca")
    dense_head = fit_logistic(
        train,
        TrainConfig(epochs=cfg.epochs, step_size=cfg.step_size, seed=cfg.seed + 3),
    )
    pipe_dense = Pipeline(
        [Identity(), dense_head], taps=[("input", 0)], input_dim=cfg.d
    )
    bases = _pick_bases(test, cfg)
    families = {
        "coarse": Isotropic(cfg.eps, cfg.n_probes),
        "aligned": SubspaceAligned(pca.components, cfg.eps, cfg.n_probes),
    }
    models = [("pca", pipe_pca, "pca"), ("dense", pipe_dense, "input")]
    diagnostics, retained, _ = _two_model_diagnostics(
        cfg, models, families, bases, reference_label="pca"
    )
    return ExperimentReport(
        config=cfg.to_json_dict(),
        risk={
            "test_error_pca": classification_error(pipe_pca, test),
            "test_error_dense": classification_error(pipe_dense, test),
        },
        extras={"retained_k": retained},
        diagnostics=diagnostics,
        provenance=_provenance(cfg),
    )


def _digits_data(cfg: ExperimentConfig):
    """Real digits CSV when configured, synthetic stroke data otherwise."""
    if cfg.digits_csv is not None:
        return load_digits(cfg.digits_csv, seed=cfg.seed), cfg.digits_csv
    x, y = gen_synthetic_digits(cfg.seed, cfg.synthetic_per_class)
    if cfg.out_dir is not None:
        os.makedirs(cfg.out_dir, exist_ok=True)
        path = os.path.join(cfg.out_dir, "synthetic_digits.csv")
        write_digits_csv(x, y, path)
        return load_digits(path, seed=cfg.seed), "synthetic-fallback"
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "synthetic_digits.csv")
        write_digits_csv(x, y, path)
        return load_digits(path, seed=cfg.seed), "synthetic-fallback"


def _digits_models(cfg: ExperimentConfig, train: Dataset):
    pca, pipe_pca = _pca_logistic_pipeline(cfg, train, cfg.pca_k, "pca")
    result_mlp = train_mlp(
        train,
        TrainConfig(
            epochs=cfg.epochs, step_size=cfg.step_size, seed=cfg.seed + 1,
            architecture=(("linear", cfg.hidden), ("relu", "hidden")),
        ),
    )
    return pca, pipe_pca, result_mlp.pipeline


def _run_digits(cfg: ExperimentConfig) -> ExperimentReport:
    (train, test), source = _digits_data(cfg)
    pca, pipe_pca, pipe_mlp = _digits_models(cfg, train)
    bases = _pick_bases(test, cfg)
    families = {
        "coarse": Isotropic(cfg.eps, cfg.n_probes),
        "aligned": SubspaceAligned(pca.components, cfg.eps, cfg.n_probes),
    }
    models = [("pca", pipe_pca, "pca"), ("mlp_hidden", pipe_mlp, "hidden")]
    diagnostics, retained, _ = _two_model_diagnostics(
        cfg, models, families, bases, reference_label="pca"
    )
    return ExperimentReport(
        config=cfg.to_json_dict(),
        risk={
            "test_error_pca": classification_error(pipe_pca, test),
            "test_error_mlp": classification_error(pipe_mlp, test),
        },
        extras={"retained_k": retained, "data_source": source},
        diagnostics=diagnostics,
        provenance=_provenance(cfg),
    )


def _sweep_report(cfg, rows, extras) -> ExperimentReport:
    return ExperimentReport(
        config=cfg.to_json_dict(),
        risk={},
        extras=extras,
        tables={"sweep": rows},
        provenance=_provenance(cfg),
    )


def _sweep_point(cfg, models, design, reference_label, bases, retain=None):
    """Mean similarity and mean rank for one probe design."""
    sub = replace(cfg)
    report, retained, jets = _two_model_diagnostics(
        sub, models, {"probe": design}, bases, reference_label=reference_label
    )
    if retain is not None:
        labels = [m[0] for m in models]
        sims = [
            jet_sim(ja.jacobian, jb.jacobian, retain).score
            for ja, jb in zip(jets[("probe", labels[0])], jets[("probe", labels[1])])
        ]
        mean_sim = float(np.mean(sims))
    else:
        (pair,) = report.jetsim.keys()
        mean_sim = float(np.mean([r.score for r in report.jetsim[pair]]))
    all_ranks = [r.rank for results in report.ranks.values() for r in results]
    return mean_sim, float(np.mean(all_ranks)), retained["probe"], jets


def _run_sweep(cfg: ExperimentConfig) -> ExperimentReport:
    (train, test), source = _digits_data(cfg)
    _pca, pipe_pca, pipe_mlp = _digits_models(cfg, train)
    models = [("pca", pipe_pca, "pca"), ("mlp_hidden", pipe_mlp, "hidden")]
    bases = _pick_bases(test, cfg)
    rows = []
    extras: dict = {"data_source": source}
    if cfg.experiment == "sweep_eps":
        for eps in sorted(cfg.eps_grid):
            sim, rank, k_ret, _ = _sweep_point(
                cfg, models, Isotropic(eps, cfg.n_probes), "pca", bases
            )
            rows.append({"value": float(eps), "mean_jetsim": sim, "mean_rank": rank})
    elif cfg.experiment == "sweep_probes":
        for j in cfg.probe_grid:
            sim, rank, k_ret, _ = _sweep_point(
                cfg, models, Isotropic(cfg.eps, int(j)), "pca", bases
            )
            rows.append({"value": float(j), "mean_jetsim": sim, "mean_rank": rank})
    else:  # sweep_k
        design = Isotropic(cfg.eps, cfg.n_probes)
        _, _, _, jets = _sweep_point(cfg, models, design, "pca", bases)
        stacked = jets[("probe", "pca")] + jets[("probe", "mlp_hidden")]
        extras["variance_rule_k"] = select_k_variance(stacked, cfg.retain_rho)
        for k in cfg.k_grid:
            sim, rank, _, _ = _sweep_point(
                cfg, models, design, "pca", bases, retain=FixedDimension(int(k))
            )
            rows.append({"value": float(k), "mean_jetsim": sim, "mean_rank": rank})
    return _sweep_report(cfg, rows, extras)


def _run_cost(cfg: ExperimentConfig) -> ExperimentReport:
    (train, test), source = _digits_data(cfg)
    _pca, pipe_pca, pipe_mlp = _digits_models(cfg, train)
    models = [("pca", pipe_pca, "pca"), ("mlp_hidden", pipe_mlp, "hidden")]
    bases = _pick_bases(test, cfg, count=cfg.n_jet)
    ridge = _ridge_policy(cfg)
    probes_rng = RngStream(cfg.seed, STREAM_PROBES)
    rows = []
    for j_idx, j in enumerate(cfg.cost_probe_counts):
        design = Isotropic(cfg.eps, int(j))
        for _, pipe, _tap in models:
            pipe.reset_counter()
        t0 = time.perf_counter()
        for label, pipe, tap in models:
            estimate_jets_over_bases(
                pipe, tap, bases, design, probes_rng.child(j_idx),
                ridge=ridge, resample_per_base=cfg.resample_probes,
                max_workers=_workers(cfg),
            )
        elapsed = time.perf_counter() - t0
        total = sum(pipe.read_counter() for _, pipe, _ in models)
        base_passes = cfg.n_jet * len(models)
        rows.append(
            {
                "n_jet": cfg.n_jet,
                "probes": int(j),
                "taps": len(models),
                "time_s": elapsed,
                "fwd_passes": total - base_passes,
                "base_passes": base_passes,
            }
        )
    return ExperimentReport(
        config=cfg.to_json_dict(),
        risk={},
        extras={"data_source": source},
        tables={"cost": rows},
        provenance=_provenance(cfg),
    )


_RUNNERS = {
    "linreg": _run_linreg,
    "deep_regressor": _run_deep_regressor,
    "pipeline_classification": _run_pipeline_classification,
    "digits": _run_digits,
    "sweep_eps": _run_sweep,
    "sweep_probes": _run_sweep,
    "sweep_k": _run_sweep,
    "cost": _run_cost,
}


def run_experiment(cfg: ExperimentConfig, plot_data: bool = False) -> ExperimentReport:
    """Run one experiment; writes report files when cfg.out_dir is set."""
    start = time.perf_counter()
    report = _RUNNERS[cfg.experiment](cfg)
    report.wall_time = time.perf_counter() - start
    if cfg.out_dir is not None:
        report.write(cfg.out_dir, plot_data=plot_data)
    return report
