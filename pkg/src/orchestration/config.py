from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, ValidationInfo, field_validator, model_validator

from src.errors import ConfigError
from src.model.spec import MlpSpec
from src.schedules.lr import LrSchedule, schedule_from_dict
from src.training.trainer import TrainerConfig
from src.utils.yaml import read_yaml_mapping

logger = logging.getLogger(__name__)


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelConfig(_Section):
    layer_dims: List[int] = Field(default_factory=lambda: [2, 32, 32, 2], min_length=2)
    activation: Literal["relu", "tanh"] = "relu"
    batchnorm: Union[bool, List[bool]] = True
    l2_coeff: float = Field(5e-4, ge=0)

    def to_spec(self) -> MlpSpec:
        bn = self.batchnorm if isinstance(self.batchnorm, bool) else tuple(self.batchnorm)
        return MlpSpec(tuple(self.layer_dims), self.activation, bn, self.l2_coeff)


class DataConfig(_Section):
    generator: Literal["blobs", "spirals", "xor"] = "spirals"
    n_train: int = Field(1000, ge=1)
    n_test: int = Field(1000, ge=1)
    noise: float = Field(0.05, ge=0)
    n_classes: int = Field(3, ge=2, description="blobs only")
    seed: int = 0
    csv_path: Optional[str] = Field(None, description="when set, replaces the generator")
    csv_test_path: Optional[str] = None
    label_column: str = "label"
    test_fraction: float = Field(0.5, gt=0, lt=1)


class ScheduleConfig(_Section):
    kind: Literal["constant", "cyclic", "cosine", "piecewise"] = "constant"
    alpha1: float = Field(0.05, gt=0)
    alpha2: Optional[float] = Field(None, gt=0)
    cycle: Optional[int] = Field(None, ge=1)
    budget: Optional[int] = Field(None, ge=1, description="piecewise only; defaults to trainer.budget")
    base: Optional[float] = Field(None, gt=0)
    seg_start: Optional[int] = Field(None, ge=0)
    seg_len: Optional[int] = Field(None, ge=1)
    period: Optional[int] = Field(None, ge=1)

    @field_validator("alpha2")
    @classmethod
    def _alpha_order(cls, v: Optional[float], info: ValidationInfo) -> Optional[float]:
        alpha1 = info.data.get("alpha1")
        if v is not None and alpha1 is not None and v > alpha1:
            raise ValueError(f"cyclic schedule needs α1 ≥ α2, got α1={alpha1}, α2={v}")
        return v

    @model_validator(mode="after")
    def _cyclic_fields(self) -> "ScheduleConfig":
        if self.kind == "cyclic" and (self.alpha2 is None or self.cycle is None):
            raise ValueError("cyclic schedule needs alpha2 and cycle")
        return self

    def build(self, default_budget: int) -> LrSchedule:
        return schedule_from_dict(self.model_dump(exclude_none=True), default_budget)


class TrainerSection(_Section):
    momentum: float = Field(0.9, ge=0, lt=1)
    batch_size: int = Field(50, ge=1)
    budget: int = Field(3000, ge=1, description="iterations of one training budget B")
    eval_every: int = Field(0, ge=0)
    bn_batch_size: Optional[int] = Field(None, ge=1)


class PretrainSection(_Section):
    schedule: ScheduleConfig = Field(default_factory=lambda: ScheduleConfig(kind="piecewise", alpha1=0.05))


class SwaSection(_Section):
    enabled: bool = True
    schedule: ScheduleConfig = Field(
        default_factory=lambda: ScheduleConfig(kind="cyclic", alpha1=0.05, alpha2=0.0005, cycle=50)
    )
    capture_every: Optional[int] = Field(None, ge=1)
    include_init: bool = True


class LandscapeSection(_Section):
    enabled: bool = False
    n_rays: int = Field(10, ge=1)
    t_max: float = Field(20.0, gt=0)
    n_ts: int = Field(41, ge=3)
    deltas: List[float] = Field(default_factory=lambda: [0.1, 0.3, 1.0])
    segment_range: List[float] = Field(default_factory=lambda: [-0.5, 1.5], min_length=2, max_length=2)
    segment_points: int = Field(41, ge=2)
    plane: bool = False
    grid_resolution: int = Field(25, ge=2)
    grid_pad: float = Field(0.2, ge=0)

    @field_validator("deltas")
    @classmethod
    def _positive(cls, v: List[float]) -> List[float]:
        if not v or any(d <= 0 for d in v):
            raise ValueError("deltas must be a non-empty list of positive numbers")
        return v


class EnsembleSection(_Section):
    enabled: bool = False
    n_snapshots: int = Field(5, ge=2, description="last captures of the SWA run to ensemble")


class ExperimentSection(_Section):
    name: str = "swa-lab"
    recipe: Literal["budget", "fixed-lr", "lr-sweep"] = "budget"
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4], min_length=1)
    pretrain_fraction: float = Field(0.75, gt=0, lt=1)
    budgets: List[float] = Field(default_factory=lambda: [1.0, 1.25, 1.5], min_length=1)
    swa_start_fraction: float = Field(0.5, ge=0, lt=1, description="fixed-lr: averaging starts here")
    sweep: Dict[str, ScheduleConfig] = Field(default_factory=dict, description="lr-sweep: name -> schedule")
    landscape: LandscapeSection = Field(default_factory=LandscapeSection)
    ensemble: EnsembleSection = Field(default_factory=EnsembleSection)

    @field_validator("budgets")
    @classmethod
    def _budgets(cls, v: List[float], info: ValidationInfo) -> List[float]:
        frac = info.data.get("pretrain_fraction", 0.75)
        if any(b <= frac for b in v):
            raise ValueError(f"every budget must exceed pretrain_fraction={frac}")
        return sorted(v)


class OutputsSection(_Section):
    dir: str = "runs/default"


class ExperimentConfig(_Section):
    model: ModelConfig = Field(default_factory=ModelConfig)
    data: DataConfig = Field(default_factory=DataConfig)
    trainer: TrainerSection = Field(default_factory=TrainerSection)
    pretrain: PretrainSection = Field(default_factory=PretrainSection)
    swa: SwaSection = Field(default_factory=SwaSection)
    experiment: ExperimentSection = Field(default_factory=ExperimentSection)
    outputs: OutputsSection = Field(default_factory=OutputsSection)

    @model_validator(mode="after")
    def _sweep_present(self) -> "ExperimentConfig":
        if self.experiment.recipe == "lr-sweep" and not self.experiment.sweep:
            raise ValueError("recipe lr-sweep needs at least one entry under experiment.sweep")
        return self

    @property
    def budget_iters(self) -> int:
        return self.trainer.budget

    def trainer_config(self, schedule: LrSchedule, iters: int, seed: int, **overrides: Any) -> TrainerConfig:
        base: Dict[str, Any] = dict(
            schedule=schedule,
            iters=iters,
            momentum=self.trainer.momentum,
            batch_size=self.trainer.batch_size,
            seed=seed,
            eval_every=self.trainer.eval_every,
            bn_batch_size=self.trainer.bn_batch_size,
            capture_every=self.swa.capture_every,
            include_init=self.swa.include_init,
        )
        base.update(overrides)
        return TrainerConfig(**base)


def _key_of(loc: tuple) -> str:
    return ".".join(str(p) for p in loc)


def _line_of(raw_text: str, key: str) -> Optional[int]:
    """Line of the deepest component of `key` found by walking its path top-down."""
    lines = raw_text.splitlines()
    found: Optional[int] = None
    start = 0
    for part in (p for p in key.split(".") if not p.isdigit()):
        for n in range(start, len(lines)):
            if lines[n].strip().startswith(f"{part}:"):
                found, start = n, n + 1
                break
        else:
            break
    return None if found is None else found + 1


def parse_config(raw: Dict[str, Any], source_text: str = "") -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        err = exc.errors()[0]
        key = _key_of(err["loc"])
        msg = str(err["msg"]).removeprefix("Value error, ")
        raise ConfigError(msg, key=key or None, line=_line_of(source_text, key) if key else None) from exc


def load_config(path: str | Path) -> ExperimentConfig:
    """Read and validate an experiment YAML; every omitted key takes its default."""
    raw, text = read_yaml_mapping(path)
    cfg = parse_config(raw, text)
    logger.info("Config loaded | path=%s | recipe=%s | seeds=%d", path, cfg.experiment.recipe, len(cfg.experiment.seeds))
    return cfg


def dump_config(cfg: ExperimentConfig, path: str | Path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w", encoding="utf-8") as f:
        yaml.safe_dump(cfg.model_dump(mode="json"), f, sort_keys=False, allow_unicode=True)
    return p
