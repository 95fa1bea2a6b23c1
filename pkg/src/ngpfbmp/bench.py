"""Monte Carlo benchmarks: NMSE-vs-SNR, NMSE-vs-p and hyperparameter robustness."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .baselines import omp_recover
from .datagen import SignalModel, add_noise, gen_matrix, gen_signal, trial_seeds
from .errors import ConfigError
from .estimator import recover
from .search import SearchConfig

log = logging.getLogger(__name__)

CSV_SCHEMA_VERSION = 1
CSV_HEADER = [
    "experiment", "method", "M", "N", "p", "snr_db", "trials", "nmse_db", "mean_time_s",
    "support_exact_rate", "p_hat_mean", "sigma2_hat_mean", "seed",
]
EXPERIMENTS = ("snr_sweep", "p_sweep", "hyper_robustness", "image")
MAX_SIGNAL_REDRAWS = 1000


@dataclass
class ExperimentConfig:
    experiment: str = "snr_sweep"
    M: int = 256
    N: int = 1024
    p: list[float] = field(default_factory=lambda: [0.005])
    snr_db: list[float] = field(default_factory=lambda: [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0])
    trials: int = 100
    D: int = 5
    P: int | None = None
    tail_prob: float = 1e-3
    p_init: float = 0.003
    seed: int = 0
    signal_model: str = "gaussian_iid"
    output: str | None = None
    workers: int = 1
    record_time: bool = False
    # image experiment
    image: str | None = None
    size: int = 32
    M_per_band: int | None = None
    keep_fraction: float = 0.05

    def validate(self) -> "ExperimentConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"field 'experiment': unknown kind {self.experiment!r}")
        if not self.p:
            raise ConfigError("field 'p': grid must be nonempty")
        if not self.snr_db:
            raise ConfigError("field 'snr_db': grid must be nonempty")
        if self.trials < 1:
            raise ConfigError("field 'trials': must be >= 1")
        if self.M < 1 or self.N < 1:
            raise ConfigError("fields 'M'/'N': must be >= 1")
        for v in self.p:
            if not 0.0 < v < 1.0:
                raise ConfigError(f"field 'p': {v} outside (0, 1)")
        if not 0.0 < self.p_init < 1.0:
            raise ConfigError("field 'p_init': must lie in (0, 1)")
        if self.D < 1:
            raise ConfigError("field 'D': must be >= 1")
        if not 0.0 < self.tail_prob <= 0.5:
            raise ConfigError("field 'tail_prob': must lie in (0, 0.5]")
        try:
            SignalModel.named(self.signal_model)
        except ValueError as exc:
            raise ConfigError(f"field 'signal_model': {exc}") from None
        return self

    def search_config(self) -> SearchConfig:
        return SearchConfig(P=self.P, D=self.D, tail_prob=self.tail_prob)


_LIST_FIELDS = {"p", "snr_db"}
_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _coerce(name: str, value):
    kind = _FIELD_TYPES[name]
    try:
        if name in _LIST_FIELDS:
            if isinstance(value, str):
                value = [v for v in value.split(",") if v.strip()]
            elif not isinstance(value, (list, tuple)):
                value = [value]
            return [float(v) for v in value]
        if value is None:
            if "None" in kind:
                return None
            raise TypeError("null not allowed")
        if kind.startswith("int"):
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise TypeError(f"expected an integer, got {value!r}")
            return int(value)
        if kind == "float":
            return float(value)
        if kind == "bool":
            if isinstance(value, str):
                if value.lower() in ("1", "true", "yes"):
                    return True
                if value.lower() in ("0", "false", "no"):
                    return False
                raise TypeError(f"expected a boolean, got {value!r}")
            return bool(value)
        return str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field {name!r}: {exc}") from None


def parse_config(path=None, overrides: dict | None = None, defaults: dict | None = None) -> ExperimentConfig:
    """Load a JSON config, then apply ``overrides`` (flag values win over the file)."""
    values: dict = dict(defaults or {})
    if path is not None:
        text = Path(path).read_text()
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")
        values.update(doc)
    for key, val in (overrides or {}).items():
        if val is not None:
            values[key] = val
    unknown = sorted(set(values) - set(_FIELD_TYPES))
    if unknown:
        raise ConfigError(f"unknown config key {unknown[0]!r}")
    return ExperimentConfig(**{k: _coerce(k, v) for k, v in values.items()}).validate()


@dataclass
class _TrialOutcome:
    method: str
    err_ratio: float
    seconds: float
    exact: bool
    p_hat: float = math.nan
    sigma2_hat: float = math.nan


def _draw_problem(cfg: ExperimentConfig, p: float, snr_db: float, trial: int):
    """Seeded (phi, x, y, sigma2) for one trial.

    Sub-seeds depend on (master seed, trial, stream) only, so every grid
    point reuses the same matrices and noise draws. All-zero signals are
    redrawn since the normalized error is undefined for them.
    """
    phi = gen_matrix(cfg.M, cfg.N, trial_seeds(cfg.seed, trial, 0))
    model = SignalModel.named(cfg.signal_model)
    for attempt in range(MAX_SIGNAL_REDRAWS):
        x = gen_signal(cfg.N, p, model, trial_seeds(cfg.seed, trial, 1, attempt))
        if x.support:
            break
    else:
        raise RuntimeError(f"could not draw a nonzero signal at p={p}")
    y, sigma2 = add_noise(phi @ x.values, snr_db, trial_seeds(cfg.seed, trial, 2))
    return phi, x, y, sigma2


def _ratio(x_true, x_hat) -> float:
    err = x_hat - x_true
    return float(np.vdot(err, err).real / np.vdot(x_true, x_true).real)


def _run_trial(job) -> list[_TrialOutcome]:
    cfg, p, snr_db, trial = job
    phi, x, y, _ = _draw_problem(cfg, p, snr_db, trial)
    search = cfg.search_config()
    out = []
    p_inits = [("ngpfbmp", cfg.p_init)]
    if cfg.experiment == "hyper_robustness":
        p_inits = [(f"ngpfbmp[p_init={cfg.p_init:g}]", cfg.p_init), ("ngpfbmp[p_init=true]", p)]
    for name, p_init in p_inits:
        t0 = time.perf_counter()
        res = recover(phi, y, p_init=p_init, config=search)
        dt = time.perf_counter() - t0
        out.append(_TrialOutcome(
            name, _ratio(x.values, res.x_ammse), dt, tuple(res.s_map) == x.support,
            res.p_hat, res.sigma2_hat,
        ))
    t0 = time.perf_counter()
    omp = omp_recover(phi, y, k_target=len(x.support))
    dt = time.perf_counter() - t0
    out.append(_TrialOutcome("omp", _ratio(x.values, omp.values), dt, omp.support == x.support))
    return out


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isnan(v):
            return "NA"
        return format(v, ".10g")
    return str(v)


def _grid(cfg: ExperimentConfig) -> list[tuple[float, float]]:
    if cfg.experiment == "p_sweep":
        return [(p, cfg.snr_db[0]) for p in cfg.p]
    if cfg.experiment == "snr_sweep":
        return [(cfg.p[0], s) for s in cfg.snr_db]
    return [(p, s) for p in cfg.p for s in cfg.snr_db]


def run_experiment(cfg: ExperimentConfig) -> list[dict]:
    """Run every grid point and return one row per (grid point, method), in grid order."""
    if cfg.experiment == "image":
        raise ConfigError("field 'experiment': image runs go through 'image recover'")
    rows = []
    pool = ProcessPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    try:
        for p, snr in _grid(cfg):
            jobs = [(cfg, p, snr, t) for t in range(cfg.trials)]
            outcomes = list(pool.map(_run_trial, jobs)) if pool else [_run_trial(j) for j in jobs]
            by_method: dict[str, list[_TrialOutcome]] = {}
            for trial in outcomes:
                for o in trial:
                    by_method.setdefault(o.method, []).append(o)
            for method, os_ in by_method.items():
                ratio = float(np.mean([o.err_ratio for o in os_]))
                mean_time = float(np.mean([o.seconds for o in os_]))
                log.info("%s p=%g snr=%g: nmse=%.2f dB, %.4f s/trial", method, p, snr,
                         10 * math.log10(ratio) if ratio > 0 else -math.inf, mean_time)
                rows.append({
                    "experiment": cfg.experiment,
                    "method": method,
                    "M": cfg.M,
                    "N": cfg.N,
                    "p": p,
                    "snr_db": snr,
                    "trials": len(os_),
                    "nmse_db": 10 * math.log10(ratio) if ratio > 0 else -math.inf,
                    "mean_time_s": mean_time if cfg.record_time else math.nan,
                    "support_exact_rate": float(np.mean([o.exact for o in os_])),
                    "p_hat_mean": float(np.mean([o.p_hat for o in os_])),
                    "sigma2_hat_mean": float(np.mean([o.sigma2_hat for o in os_])),
                    "seed": cfg.seed,
                })
            if cfg.experiment == "hyper_robustness":
                a, b = (m for m in by_method if m.startswith("ngpfbmp"))
                same = sum(
                    x.err_ratio == y.err_ratio for x, y in zip(by_method[a], by_method[b])
                )
                log.info("p_init invariance: %d/%d trials identical", same, len(by_method[a]))
    finally:
        if pool is not None:
            pool.shutdown()
    return rows


def format_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow([_fmt(row[k]) for k in CSV_HEADER])
    return buf.getvalue()


def write_csv(rows: list[dict], path) -> None:
    Path(path).write_text(format_csv(rows))


def config_dict(cfg: ExperimentConfig) -> dict:
    return asdict(cfg)
