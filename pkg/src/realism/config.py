"""JSON experiment configuration.

A config is one JSON document. Unknown keys are rejected everywhere, and the
master seed must be given explicitly (``--seed`` on the command line
overrides it). Model specs are tagged by ``kind``::

    {"kind": "iid-categorical", "probs": [0.5, 0.5], "description_bits": 1}
    {"kind": "uniform", "size": 2}
    {"kind": "constant-symbol", "size": 2, "symbol": 0}
    {"kind": "markov-order1", "transition": [[0.9, 0.1], [0.1, 0.9]]}
    {"kind": "periodic-pattern", "size": 2, "pattern": "01"}
    {"kind": "memorized-dataset", "size": 2, "dataset": ["0110", "1001"]}

Sequences inside configs are base-36 digit strings or lists of ints.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from . import models as m
from .continuous import GaussianMixtureDensity
from .mixture import Mixture, default_zoo, prior_from_description_bits

__all__ = ["ExperimentConfig", "ConfigError", "load_config", "build_model", "build_mixture", "build_density"]


class ConfigError(ValueError):
    """The configuration could not be parsed or names an invalid setting."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


def _symbols(v):
    if isinstance(v, str):
        return [int(ch, 36) for ch in v]
    return v


class IIDSpec(_Strict):
    kind: Literal["iid-categorical"]
    probs: list[float]
    description_bits: float = 0.0


class UniformSpec(_Strict):
    kind: Literal["uniform"]
    size: int
    description_bits: float = 0.0


class ConstantSpec(_Strict):
    kind: Literal["constant-symbol"]
    size: int
    symbol: int
    description_bits: float = 0.0


class MarkovSpec(_Strict):
    kind: Literal["markov-order1"]
    transition: list[list[float]]
    initial: list[float] | None = None
    description_bits: float = 0.0


class PeriodicSpec(_Strict):
    kind: Literal["periodic-pattern"]
    size: int
    pattern: list[int]
    description_bits: float = 0.0

    _parse = field_validator("pattern", mode="before")(_symbols)


class MemorizedSpec(_Strict):
    kind: Literal["memorized-dataset"]
    size: int
    dataset: list[list[int]]
    description_bits: float = 0.0

    @field_validator("dataset", mode="before")
    @classmethod
    def _parse(cls, v):
        return [_symbols(d) for d in v]


ModelSpec = Annotated[
    Union[IIDSpec, UniformSpec, ConstantSpec, MarkovSpec, PeriodicSpec, MemorizedSpec],
    Field(discriminator="kind"),
]


class DensitySpec(_Strict):
    """Diagonal Gaussian mixture: one weight, mean vector and variance vector per component."""

    weights: list[float]
    means: list[list[float]]
    variances: list[list[float]] | list[float]


class ScoreSection(_Strict):
    sequences: list[str] = []


class BoundsSection(_Strict):
    q_model: ModelSpec
    length: int = 20
    batch_sizes: list[int] = [1, 4, 16, 64]
    q_bits: list[float] = [0.0, 4.0, 12.0]
    num_batches: int = 10_000
    fill: list[ModelSpec] = []


class BenchSection(_Strict):
    scenarios: list[Literal["constant", "alternating-01", "periodic", "wrong-bias", "memorized-duplicate"]] = [
        "constant",
        "alternating-01",
        "periodic",
        "wrong-bias",
        "memorized-duplicate",
    ]
    detectors: list[str] = [
        "neg_log_p",
        "weak_typicality",
        "compression_deficiency",
        "universal_critic",
        "batched_critic:8",
    ]
    n_per_class: int = 200
    length: int = 128
    batch: int = 8
    codec: str = "arith2"
    bias: float = 0.7
    memorized_size: int = 2


class OptimizeSection(_Strict):
    p: DensitySpec
    s: DensitySpec
    x0: list[float]
    step: float = 1e-3
    steps: int = 1000


class TypicalitySection(_Strict):
    lengths: list[int]
    deltas: list[float]
    mc_samples: int = 1000


class DeficiencySection(_Strict):
    codec: str = "arith2"


class EnumerateSection(_Strict):
    length: int


class ExperimentConfig(_Strict):
    seed: int
    units: Literal["bits", "nats"] = "nats"
    p_model: ModelSpec | None = None
    mixture: list[ModelSpec] = []
    zoo: bool = True
    score: ScoreSection | None = None
    bounds: BoundsSection | None = None
    bench: BenchSection | None = None
    optimize: OptimizeSection | None = None
    typicality: TypicalitySection | None = None
    deficiency: DeficiencySection | None = None
    enumerate: EnumerateSection | None = None


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        where = ".".join(str(p) for p in first["loc"])
        raise ConfigError(f"{path}: field '{where}': {first['msg']}") from exc


def build_model(spec) -> m.Model:
    """Construct a model; invalid parameters surface as ConfigError."""
    try:
        if isinstance(spec, IIDSpec):
            return m.IIDCategorical(tuple(spec.probs), spec.description_bits)
        if isinstance(spec, UniformSpec):
            return m.Uniform(spec.size, spec.description_bits)
        if isinstance(spec, ConstantSpec):
            return m.ConstantSymbol(spec.size, spec.symbol, spec.description_bits)
        if isinstance(spec, MarkovSpec):
            init = tuple(spec.initial) if spec.initial is not None else None
            return m.MarkovChain(tuple(map(tuple, spec.transition)), init, spec.description_bits)
        if isinstance(spec, PeriodicSpec):
            return m.PeriodicPattern(spec.size, tuple(spec.pattern), spec.description_bits)
        if isinstance(spec, MemorizedSpec):
            return m.MemorizedDataset(spec.size, tuple(map(tuple, spec.dataset)), spec.description_bits)
    except ValueError as exc:
        raise ConfigError(f"model '{spec.kind}': {exc}") from exc
    raise ConfigError(f"unsupported model spec {spec!r}")


def model_to_spec(model: m.Model) -> dict:
    base = {"kind": model.kind, "description_bits": model.description_bits}
    if isinstance(model, m.IIDCategorical):
        base["probs"] = list(model.probs)
    elif isinstance(model, (m.Uniform, m.ConstantSymbol, m.PeriodicPattern, m.MemorizedDataset)):
        base["size"] = model.size
        if isinstance(model, m.ConstantSymbol):
            base["symbol"] = model.symbol
        elif isinstance(model, m.PeriodicPattern):
            base["pattern"] = list(model.pattern)
        elif isinstance(model, m.MemorizedDataset):
            base["dataset"] = [list(d) for d in model.dataset]
    elif isinstance(model, m.MarkovChain):
        base["transition"] = [list(r) for r in model.transition]
        if model.initial is not None:
            base["initial"] = list(model.initial)
    return base


def require_p_model(cfg: ExperimentConfig) -> m.Model:
    if cfg.p_model is None:
        raise ConfigError("field 'p_model': required for this subcommand")
    return build_model(cfg.p_model)


def mixture_models(cfg: ExperimentConfig, alphabet: int) -> list[m.Model]:
    models = default_zoo(alphabet) if cfg.zoo else []
    models += [build_model(s) for s in cfg.mixture]
    if not models:
        raise ConfigError("field 'mixture': empty mixture and zoo disabled")
    return models


def build_mixture(cfg: ExperimentConfig, alphabet: int) -> Mixture:
    try:
        return prior_from_description_bits(mixture_models(cfg, alphabet))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"field 'mixture': {exc}") from exc


def build_density(spec: DensitySpec) -> GaussianMixtureDensity:
    try:
        return GaussianMixtureDensity.from_components(spec.weights, spec.means, spec.variances)
    except ValueError as exc:
        raise ConfigError(f"density: {exc}") from exc
