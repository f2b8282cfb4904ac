"""Module orchestrating experiments and writing their artifacts"""

import json
import logging
import os
import time
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd

from ..booster import (ConstantHypothesis, CoverHypothesis, Voter, WeightedBoostHypothesis, cover_learner,
                       weighted_boost)
from ..data.Sources import LabeledSource, export_dataset, make_source
from ..errors import AcceptanceError, ConfigError, InputError
from ..geometry import lift_points, sample_margin, soft_margin_estimate
from ..learner import HalfspaceHypothesis, WeakParams, compute_params, hitting_set_check, region_learner
from ..logger import CustomLogger
from ..sampler import ConsistencyPolytope, WalkConfig, find_interior, min_slack, sample_uniform
from ..utils import (derive_seed, dump_json, dump_jsonl, frame_points, points_frame, read_csv, to_jsonable,
                     write_csv)
from .Config import RunConfig, parse_criteria

logger: logging.Logger = CustomLogger().get_logger()

VALIDATION_KEY = 10000
TEST_KEY = 20000


@dataclass
class MetricsRecord:
    """Summary of one run; rates are fractions of the held-out sample."""

    experiment: str
    total_error: float = float('nan')
    false_pos: float = float('nan')
    false_neg: float = float('nan')
    eta_hat: float = float('nan')
    region_count: int = 0
    attempts: int = 0
    samples_consumed: int = 0
    tag: Optional[str] = None
    seed: int = 0
    wall_time: float = 0.0
    extra: Dict = field(default_factory=dict)

    def to_record(self, config: Optional[Dict] = None) -> Dict:
        """Record for metrics.json; wall time is kept out so reruns are byte-identical."""
        record = {
            "experiment": self.experiment,
            "total_error": self.total_error,
            "false_pos": self.false_pos,
            "false_neg": self.false_neg,
            "eta_hat": self.eta_hat,
            "region_count": self.region_count,
            "attempts": self.attempts,
            "samples_consumed": self.samples_consumed,
            "tag": self.tag,
            "seed": self.seed,
            "extra": self.extra,
        }
        if config is not None:
            record["config"] = config
        return record


def build_source(cfg: RunConfig) -> LabeledSource:
    return make_source(cfg.source.kind, cfg.experiment.seed, **cfg.source_params())


def build_params(cfg: RunConfig, src: LabeledSource) -> WeakParams:
    k = src.target.k
    return compute_params(src.n, k, cfg.rho, cfg.learner.epsilon,
                          m_minus=cfg.learner.m_minus, m_plus=cfg.learner.m_plus)


def build_walk(cfg: RunConfig, src: LabeledSource) -> WalkConfig:
    steps = cfg.sampler.steps_per_sample or WalkConfig.default_steps(src.n + 2, cfg.rho)
    return WalkConfig(steps, rng_seed=derive_seed(cfg.experiment.seed, 1))


def build_region_fn(cfg: RunConfig, params: WeakParams, walk: WalkConfig):
    learner = cfg.learner

    def region_fn(source: LabeledSource, seed: int):
        return region_learner(source, learner.epsilon, cfg.rho, learner.gamma, learner.attempt_budget, params,
                              walk, m_check=learner.m_check, seed=derive_seed(cfg.experiment.seed, seed),
                              workers=cfg.experiment.workers, screen_size=learner.screen_size)
    return region_fn


def predictions_frame(h, X: np.ndarray, y: np.ndarray) -> pd.DataFrame:
    return points_frame(X, y, prediction=h.predict(X))


def rates_from_predictions(df: pd.DataFrame) -> Tuple[float, float, float]:
    """(false_pos, false_neg, total) recomputed from a predictions table."""
    y, pred = df["label"].to_numpy(), df["prediction"].to_numpy()
    false_pos = float(np.mean((pred == 1) & (y == -1)))
    false_neg = float(np.mean((pred == -1) & (y == 1)))
    return false_pos, false_neg, false_pos + false_neg


def load_hypothesis(record: Dict):
    """Rebuild a cover, boosted or constant hypothesis from its record."""
    kind = record.get("kind")
    if kind == "cover":
        return CoverHypothesis.from_record(record)
    if kind == "constant":
        return ConstantHypothesis(int(record["label"]), int(record["n"]))
    if kind == "boost":
        voters, alphas = [], []
        for entry in record["rounds"]:
            inner = entry["hypothesis"]
            h = load_hypothesis(inner) if "kind" in inner else HalfspaceHypothesis.from_record(inner)
            voters.append(Voter(h, bool(entry["abstaining"])))
            alphas.append(float(entry["alpha"]))
        return WeightedBoostHypothesis(voters, alphas, int(record["n"]))
    raise InputError(f"unknown hypothesis kind '{kind}'")


class ExperimentRunner:
    """
    Runs one configured experiment and writes its artifacts under ``out_dir``.

    Parameters
    ----------
    cfg : RunConfig
        Validated configuration; it is echoed into every artifact.
    """

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.config_record = to_jsonable(cfg.to_dict())
        self.out_dir = cfg.out_dir
        self.artifacts: Dict[str, str] = {}

    def path(self, name: str) -> str:
        path = os.path.join(self.out_dir, name)
        self.artifacts[name] = path
        return path

    def run(self) -> Tuple[MetricsRecord, Dict[str, str]]:
        kind = self.cfg.experiment.kind
        os.makedirs(self.out_dir, exist_ok=True)
        logger.info("Starting %s run with seed %d in %s", kind, self.cfg.experiment.seed, self.out_dir)
        start = time.perf_counter()
        handler = {
            "gen": self.run_gen,
            "sample-diag": self.run_sample_diag,
            "learn-cover": self.run_learn,
            "learn-boost": self.run_learn,
            "eval": self.run_eval,
            "paper-check": self.run_paper_check,
        }[kind]
        metrics = handler()
        metrics.wall_time = time.perf_counter() - start
        dump_json(metrics.to_record(self.config_record), self.path("metrics.json"))
        dump_json({"wall_time": metrics.wall_time, "config": self.config_record}, self.path("timing.json"))
        logger.info("Finished %s run in %.2f s", kind, metrics.wall_time)
        if kind == "paper-check" and metrics.tag != "pass":
            raise AcceptanceError(f"failed criteria: {metrics.extra['failed']}")
        return metrics, self.artifacts

    def run_gen(self) -> MetricsRecord:
        src = build_source(self.cfg)
        m = self.cfg.output.dataset_size
        df = export_dataset(src, m, self.path("dataset.csv"), config=self.config_record)
        dump_json(dict(src.to_record(), config=self.config_record), self.path("target.json"))
        X, y = frame_points(df)
        return MetricsRecord(
            experiment="gen", samples_consumed=src.draws, seed=self.cfg.experiment.seed,
            eta_hat=soft_margin_estimate(src.target, X, self.cfg.rho),
            extra={"p_plus": float(np.mean(y == 1)), "sample_margin": sample_margin(src.target, X)})

    def run_sample_diag(self) -> MetricsRecord:
        src = build_source(self.cfg)
        params = build_params(self.cfg, src)
        walk = build_walk(self.cfg, src)
        X, y = src.spawn(0).sample(params.m_minus + params.m_plus)
        lifted = lift_points(X, src.radius)
        H = ConsistencyPolytope(src.n + 2, lifted[y == 1], lifted[y == -1])
        warm = find_interior(H, self.cfg.sampler.interior_slack or 0.0)
        cfg = WalkConfig(walk.steps_per_sample, warm_start=warm, rng_seed=walk.rng_seed)
        W = sample_uniform(H, cfg, size=self.cfg.output.diag_samples)
        slack = min_slack(H, W)
        df = pd.DataFrame(W, columns=[f"w{i}" for i in range(H.dim)])
        df.insert(0, "sample", np.arange(W.shape[0]))
        df["min_slack"] = slack
        write_csv(df, self.path("samples.csv"), config=self.config_record)
        return MetricsRecord(
            experiment="sample-diag", samples_consumed=src.draws, seed=self.cfg.experiment.seed,
            extra={"constraints": H.n_constraints, "interior_slack": float(min_slack(H, warm)),
                   "steps_per_sample": walk.steps_per_sample, "mean_min_slack": float(slack.mean()),
                   "min_min_slack": float(slack.min())})

    def _learn_once(self, src: LabeledSource, params: WeakParams, walk: WalkConfig, rep: int):
        cfg = self.cfg
        region_fn = build_region_fn(cfg, params, walk)
        if cfg.experiment.kind == "learn-cover":
            result = cover_learner(src, region_fn, cfg.learner.epsilon, cfg.learner.gamma,
                                   m_check=cfg.learner.m_check, estimate_size=cfg.booster.estimate_size,
                                   seed=rep, rejection_budget=cfg.booster.rejection_budget)
            rounds = [dict(r, repetition=rep) for r in result.rounds]
            attempts = sum(r.get("attempts", 0) for r in result.rounds)
            return result.hypothesis, result.tag, rounds, attempts, len(result.hypothesis.regions)

        def weak_fn(source: LabeledSource, seed: int):
            return region_fn(source, seed).hypothesis

        result = weighted_boost(src, weak_fn, cfg.learner.epsilon, cfg.learner.gamma, cfg.booster.rounds_budget,
                                sample_size=cfg.booster.sample_size, holdout_size=cfg.experiment.holdout_size,
                                attempts_per_round=cfg.booster.attempts_per_round, seed=rep)
        rounds = [dict(r, repetition=rep) for r in result.rounds]
        tag = "converged" if result.converged else "budget"
        return result.hypothesis, tag, rounds, len(result.rounds), len(result.hypothesis.voters)

    def run_learn(self) -> MetricsRecord:
        cfg = self.cfg
        src = build_source(cfg)
        params = build_params(cfg, src)
        walk = build_walk(cfg, src)
        dump_jsonl([dict(params.to_record(), hitting_set=hitting_set_check(params), config=self.config_record)],
                   self.path("params.jsonl"))
        best, best_error, all_rounds, total_attempts = None, float('inf'), [], 0
        for rep in range(cfg.booster.repetitions):
            train = src.spawn(rep)
            h, tag, rounds, attempts, count = self._learn_once(train, params, walk, rep)
            all_rounds.extend(rounds)
            total_attempts += attempts
            X_val, y_val = src.spawn(VALIDATION_KEY + rep).sample(cfg.experiment.holdout_size)
            val_error = float(np.mean(h.predict(X_val) != y_val))
            logger.info("Repetition %d: tag %s, validation error %.4f", rep, tag, val_error)
            if val_error < best_error:
                best, best_error, best_tag, best_count = h, val_error, tag, count
        dump_jsonl([dict(r, config=self.config_record) for r in all_rounds], self.path("rounds.jsonl"))
        X, y = src.spawn(TEST_KEY).sample(cfg.experiment.holdout_size)
        df = predictions_frame(best, X, y)
        write_csv(df, self.path("predictions.csv"), config=self.config_record)
        dump_json(dict(best.to_record(), config=self.config_record), self.path("hypothesis.json"))
        false_pos, false_neg, total = rates_from_predictions(df)
        return MetricsRecord(
            experiment=cfg.experiment.kind, total_error=total, false_pos=false_pos, false_neg=false_neg,
            eta_hat=soft_margin_estimate(src.target, X, cfg.rho), region_count=best_count,
            attempts=total_attempts, samples_consumed=src.draws, tag=best_tag, seed=cfg.experiment.seed,
            extra={"validation_error": best_error, "repetitions": cfg.booster.repetitions})

    def run_eval(self) -> MetricsRecord:
        out = self.cfg.output
        if not out.hypothesis or not out.dataset:
            raise ConfigError("eval needs output.hypothesis and output.dataset")
        try:
            with open(out.hypothesis, 'r') as f:
                h = load_hypothesis(json.load(f))
        except (OSError, json.JSONDecodeError) as e:
            raise InputError(f"cannot read hypothesis {out.hypothesis}: {e}") from e
        X, y = frame_points(read_csv(out.dataset))
        if y is None:
            raise InputError(f"dataset {out.dataset} has no label column")
        df = predictions_frame(h, X, y)
        write_csv(df, self.path("predictions.csv"), config=self.config_record)
        false_pos, false_neg, total = rates_from_predictions(df)
        return MetricsRecord(experiment="eval", total_error=total, false_pos=false_pos, false_neg=false_neg,
                             seed=self.cfg.experiment.seed, extra={"rows": int(len(df))})

    def run_paper_check(self) -> MetricsRecord:
        from .oracles import paper_check  # oracles builds on this module
        e = self.cfg.experiment
        criteria = parse_criteria(e.criteria) if e.criteria is not None else None
        summary = paper_check(self.out_dir, seed=e.seed, criteria=criteria, seeds=e.check_seeds,
                              config=self.config_record)
        return MetricsRecord(experiment="paper-check", seed=self.cfg.experiment.seed,
                             tag="pass" if summary["passed"] else "fail",
                             extra={"failed": summary["failed"]})


def run_experiment(cfg: RunConfig) -> Tuple[MetricsRecord, Dict[str, str]]:
    """Run a validated configuration; returns its metrics and the written artifact paths."""
    return ExperimentRunner(cfg).run()
