"""Run configuration shared by every command.

Values are resolved as command-line flag, then config file, then default.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

import yaml

from .target import W23_MIDPOINT, W23_SCALE

FORMATS = ("csv", "json", "svg")


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    input_dir: str | None = None
    out_dir: str = "passcomp_out"
    seed: int = 0
    folds: int = 10
    mtry: int = 15
    trees: int = 500
    jobs: int = 1
    w23_midpoint: float = W23_MIDPOINT
    w23_scale: float = W23_SCALE
    refit_w23: bool = False
    bins: int = 50
    format: str = "svg"
    methods: list = field(default_factory=lambda: [
        "random_forest", "glm_logit", "glm_probit", "glm_cloglog", "lda", "qda"])
    plays: list = field(default_factory=list)
    frames: str | None = None

    def validate(self) -> "PipelineConfig":
        if self.folds not in (5, 10):
            raise ConfigError(f"folds must be 5 or 10, got {self.folds}")
        if not 5 <= self.mtry <= 20:
            raise ConfigError(f"mtry must be in [5, 20], got {self.mtry}")
        if self.trees < 1:
            raise ConfigError(f"trees must be positive, got {self.trees}")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be positive, got {self.jobs}")
        if not self.w23_scale > 0:
            raise ConfigError(f"w23 scale must be positive, got {self.w23_scale}")
        if not 1 <= self.w23_midpoint <= 46:
            raise ConfigError(f"w23 midpoint must be in [1, 46], got {self.w23_midpoint}")
        if self.bins < 1:
            raise ConfigError(f"bins must be positive, got {self.bins}")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}, got {self.format!r}")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def dump(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            yaml.safe_dump(self.to_dict(), fh, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        return cls(**d).validate()

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a mapping")
        return cls.from_dict({k.replace("-", "_"): v for k, v in data.items()})


def resolve(cli: dict, path=None) -> PipelineConfig:
    """Merge flags over the config file over defaults.

    ``cli`` holds only the flags the user actually passed.
    """
    base = PipelineConfig.load(path).to_dict() if path else PipelineConfig().to_dict()
    base.update({k: v for k, v in cli.items() if v is not None})
    return PipelineConfig.from_dict(base)
