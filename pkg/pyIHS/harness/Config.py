"""Module for run configurations and named presets"""

import json
import logging
import os
import typing
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional

from ..errors import ConfigError
from ..logger import CustomLogger
from .env import output_root

logger: logging.Logger = CustomLogger().get_logger()

EXPERIMENT_KINDS = ("gen", "learn-boost", "learn-cover", "sample-diag", "paper-check", "eval")
KIND_ALIASES = {"acceptance": "paper-check"}
SOURCE_KINDS = ("sphere", "cube", "pancake")


@dataclass
class ExperimentSection:
    kind: str = "learn-cover"
    seed: int = 0
    holdout_size: int = 10000
    workers: int = 1
    criteria: Optional[str] = None
    check_seeds: int = 10


@dataclass
class SourceSection:
    kind: str = "sphere"
    n: int = 3
    k: int = 2
    rho: float = 0.2
    balance: Optional[float] = 0.5
    one_sided: bool = False
    retry_budget: int = 2000
    weight_bound: int = 1
    gap: float = 0.5
    sigma: float = 0.05
    spread: Optional[float] = None
    eta: Optional[float] = None
    eta_rho: float = 0.1


@dataclass
class SamplerSection:
    steps_per_sample: Optional[int] = None
    interior_slack: Optional[float] = None


@dataclass
class LearnerSection:
    rho: Optional[float] = None
    epsilon: float = 0.05
    gamma: float = 0.05
    m_minus: Optional[int] = 8
    m_plus: Optional[int] = 2000
    attempt_budget: int = 50
    m_check: Optional[int] = None
    screen_size: int = 2000


@dataclass
class BoosterSection:
    rounds_budget: int = 200
    sample_size: int = 4000
    attempts_per_round: int = 3
    repetitions: int = 1
    estimate_size: Optional[int] = None
    rejection_budget: int = 1000000


@dataclass
class OutputSection:
    out_dir: Optional[str] = None
    dataset_size: int = 1000
    diag_samples: int = 1000
    hypothesis: Optional[str] = None
    dataset: Optional[str] = None


SECTIONS = {
    "experiment": ExperimentSection,
    "source": SourceSection,
    "sampler": SamplerSection,
    "learner": LearnerSection,
    "booster": BoosterSection,
    "output": OutputSection,
}


def _coerce(value: Any, annotation, where: str) -> Any:
    args = typing.get_args(annotation)
    optional = type(None) in args
    base = next((a for a in args if a is not type(None)), annotation) if optional else annotation
    if value is None or (isinstance(value, str) and value.lower() in ("none", "null") and optional):
        if optional:
            return None
        raise ConfigError(f"{where} may not be null")
    try:
        if base is bool:
            if isinstance(value, str):
                if value.lower() in ("true", "1", "yes"):
                    return True
                if value.lower() in ("false", "0", "no"):
                    return False
                raise ValueError(value)
            return bool(value)
        if base is int:
            number = float(value) if isinstance(value, str) else value
            if isinstance(number, float) and not number.is_integer():
                raise ValueError(value)
            return int(number)
        if base is float:
            return float(value)
        return str(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}: cannot read {value!r} as {base.__name__}") from e


@dataclass
class RunConfig:
    """
    Resolved configuration of one run.

    Values resolve in the order dataclass defaults, preset, JSON config file,
    command-line overrides. Unknown sections or keys are errors.

    Parameters
    ----------
    experiment, source, sampler, learner, booster, output
        Flat key-value sections, one per module.
    """

    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    source: SourceSection = field(default_factory=SourceSection)
    sampler: SamplerSection = field(default_factory=SamplerSection)
    learner: LearnerSection = field(default_factory=LearnerSection)
    booster: BoosterSection = field(default_factory=BoosterSection)
    output: OutputSection = field(default_factory=OutputSection)
    preset: Optional[str] = None

    def to_dict(self) -> Dict:
        record = {name: asdict(getattr(self, name)) for name in SECTIONS}
        record["preset"] = self.preset
        return record

    def update(self, raw: Dict, origin: str = "config") -> "RunConfig":
        """Apply a nested {section: {key: value}} mapping in place."""
        if not isinstance(raw, dict):
            raise ConfigError(f"{origin} must be a mapping of sections")
        for section_name, values in raw.items():
            if section_name == "preset":
                continue
            if section_name not in SECTIONS:
                raise ConfigError(f"{origin}: unknown section '{section_name}'")
            if not isinstance(values, dict):
                raise ConfigError(f"{origin}: section '{section_name}' must be a mapping")
            section = getattr(self, section_name)
            hints = typing.get_type_hints(type(section))
            for key, value in values.items():
                if key not in hints:
                    raise ConfigError(f"{origin}: unknown key '{section_name}.{key}'")
                setattr(section, key, _coerce(value, hints[key], f"{section_name}.{key}"))
        return self

    def set(self, dotted: str, value: Any) -> "RunConfig":
        if dotted.count(".") != 1:
            raise ConfigError(f"override '{dotted}' must have the form section.key")
        section, key = dotted.split(".")
        return self.update({section: {key: value}}, origin="override")

    @property
    def rho(self) -> float:
        """Margin handed to the learner: learner.rho if set, else the source's."""
        return self.learner.rho if self.learner.rho is not None else self.source.rho

    @property
    def out_dir(self) -> str:
        return self.output.out_dir or os.path.join(output_root(), self.experiment.kind)

    def source_params(self) -> Dict:
        """Keyword parameters of make_source for the configured kind."""
        s = self.source
        if s.kind == "sphere":
            return {"n": s.n, "k": s.k, "rho": s.rho, "balance": s.balance, "one_sided": s.one_sided,
                    "retry_budget": s.retry_budget}
        if s.kind == "cube":
            return {"n": s.n, "k": s.k, "weight_bound": s.weight_bound}
        params = {"n": s.n, "gap": s.gap, "sigma": s.sigma, "spread": s.spread}
        if s.eta is not None:
            params.update(eta=s.eta, eta_rho=s.eta_rho)
        return params

    def validate(self) -> "RunConfig":
        e, s, l, b = self.experiment, self.source, self.learner, self.booster
        e.kind = KIND_ALIASES.get(e.kind, e.kind)
        if e.kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"experiment.kind must be one of {EXPERIMENT_KINDS}, got '{e.kind}'")
        if s.kind not in SOURCE_KINDS:
            raise ConfigError(f"source.kind must be one of {SOURCE_KINDS}, got '{s.kind}'")
        if s.n < 2 or s.k < 1:
            raise ConfigError(f"source needs n >= 2 and k >= 1, got n={s.n}, k={s.k}")
        if s.kind == "sphere" and not 0.0 < s.rho < 1.0 / 3.0:
            raise ConfigError(f"source.rho must lie in (0, 1/3), got {s.rho}")
        if s.kind == "sphere" and s.balance is not None and not 0.0 < s.balance < 1.0:
            raise ConfigError(f"source.balance must lie in (0, 1), got {s.balance}")
        if s.kind == "cube" and s.weight_bound < 1:
            raise ConfigError(f"source.weight_bound must be >= 1, got {s.weight_bound}")
        if s.kind == "pancake":
            if not s.sigma > 0:
                raise ConfigError(f"source.sigma must be positive, got {s.sigma}")
            if s.eta is None and not s.gap > 0:
                raise ConfigError(f"source.gap must be positive, got {s.gap}")
            if s.eta is not None and not 0.0 < s.eta < 0.5:
                raise ConfigError(f"source.eta must lie in (0, 1/2), got {s.eta}")
        if not 0.0 < self.rho < 1.0:
            raise ConfigError(f"learner.rho must lie in (0, 1), got {self.rho}")
        if not 0.0 < l.epsilon < 0.5:
            raise ConfigError(f"learner.epsilon must lie in (0, 1/2), got {l.epsilon}")
        if not 0.0 < l.gamma < 1.0:
            raise ConfigError(f"learner.gamma must lie in (0, 1), got {l.gamma}")
        counts = {
            "experiment.holdout_size": e.holdout_size, "experiment.workers": e.workers,
            "experiment.check_seeds": e.check_seeds,
            "source.retry_budget": s.retry_budget, "learner.attempt_budget": l.attempt_budget,
            "booster.rounds_budget": b.rounds_budget, "booster.sample_size": b.sample_size,
            "booster.attempts_per_round": b.attempts_per_round, "booster.repetitions": b.repetitions,
            "booster.rejection_budget": b.rejection_budget, "output.dataset_size": self.output.dataset_size,
            "output.diag_samples": self.output.diag_samples,
        }
        optional_counts = {
            "learner.m_minus": l.m_minus, "learner.m_plus": l.m_plus, "learner.m_check": l.m_check,
            "sampler.steps_per_sample": self.sampler.steps_per_sample, "booster.estimate_size": b.estimate_size,
        }
        counts.update({k: v for k, v in optional_counts.items() if v is not None})
        for name, value in counts.items():
            if value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value}")
        if e.criteria is not None:
            parse_criteria(e.criteria)
        if l.screen_size < 0:
            raise ConfigError(f"learner.screen_size must be nonnegative, got {l.screen_size}")
        return self


def load_presets(json_file: str = 'presets.json') -> Dict:
    """Load named presets from the presets.json file."""
    # presets.json lives in the pyIHS main directory, the parent of this one
    json_path = os.path.join(os.path.dirname(os.path.abspath(__file__)), '..', json_file)
    logger.info("Loading presets from %s", json_path)
    with open(json_path, 'r') as f:
        return json.load(f)


def get_preset(name: str) -> Dict:
    presets = load_presets()
    if name not in presets:
        raise ConfigError(f"unknown preset '{name}', choose from {sorted(presets)}")
    return presets[name]


def load_config_file(path: str) -> Dict:
    try:
        with open(path, 'r') as f:
            return json.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"config file {path} not found") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}") from e


def resolve_config(kind: Optional[str] = None, preset: Optional[str] = None, config_file: Optional[str] = None,
                   overrides: Optional[Dict[str, Any]] = None, seed: Optional[int] = None,
                   out_dir: Optional[str] = None) -> RunConfig:
    """Build and validate a RunConfig from its layered sources."""
    cfg = RunConfig()
    if preset is not None:
        cfg.update(get_preset(preset), origin=f"preset '{preset}'")
        cfg.preset = preset
    if config_file is not None:
        raw = load_config_file(config_file)
        if raw.get("preset") and preset is None:
            cfg.update(get_preset(raw["preset"]), origin=f"preset '{raw['preset']}'")
            cfg.preset = raw["preset"]
        cfg.update(raw, origin=config_file)
    for dotted, value in (overrides or {}).items():
        cfg.set(dotted, value)
    if kind is not None:
        cfg.experiment.kind = kind
    if seed is not None:
        cfg.experiment.seed = int(seed)
    if out_dir is not None:
        cfg.output.out_dir = out_dir
    return cfg.validate()


def parse_criteria(text: str) -> List[int]:
    """Criterion ids from a comma-separated list such as "1,3,12"."""
    try:
        ids = sorted({int(part) for part in str(text).split(",") if part.strip()})
    except ValueError as e:
        raise ConfigError(f"experiment.criteria must be comma-separated integers, got '{text}'") from e
    if not ids:
        raise ConfigError("experiment.criteria selects no criterion")
    return ids
