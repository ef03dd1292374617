"""Run configuration: defaults, JSON round-trip, and flag overrides.

Every tunable in the pipeline lives here so a run directory's config.json
fully determines the run (together with the seed inside it).
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .simulate import SimConfig


@dataclass
class DataConfig:
    csv: str | None = None
    time_col: str = "time"
    event_col: str = "event"
    feature_cols: list | None = None
    categorical: list = field(default_factory=list)
    sim: SimConfig | None = None
    # train/validation/test fractions
    split: list = field(default_factory=lambda: [2 / 3, 1 / 6, 1 / 6])

    def __post_init__(self):
        if self.csv is not None and self.sim is not None:
            raise ValueError("give either a csv path or a sim config, not both")


@dataclass
class ModelConfig:
    kind: str = "relu"  # relu | linear-cox
    n_layers: int = 6
    widths: list | None = None  # None -> all ones
    head: str = "linear"  # linear | mlp
    head_hidden: int = 16
    loss: str = "cont"  # cont | disc
    n_bins: int = 32
    rank_weight: float = 1.0
    rank_sigma: float = 0.1

    def __post_init__(self):
        if self.kind not in ("relu", "linear-cox"):
            raise ValueError("model kind must be 'relu' or 'linear-cox'")
        if self.head not in ("linear", "mlp"):
            raise ValueError("head must be 'linear' or 'mlp'")
        if self.loss not in ("cont", "disc"):
            raise ValueError("loss must be 'cont' or 'disc'")


@dataclass
class OptimConfig:
    lr: float = 0.1
    batch_size: int = 1024
    momentum: float = 0.9
    epochs: int = 200
    sparsity: float = 0.0  # soft-threshold strength per step
    beta0: float = 1.0
    beta_growth: float = 1.05
    beta_max: float = 1e3
    early_stop: int = 30  # epochs without validation improvement
    straight_through: bool = False  # hard patterns forward, identity backward


@dataclass
class PruneConfig:
    enabled: bool = True
    alpha_level: float = 0.05
    n_min: int = 10
    patience: int = 5
    literal_inequality: bool = False
    subtree_collapse: bool = True


@dataclass
class EvalConfig:
    bootstrap: int = 1000
    cv_folds: int = 5
    seed: int = 0


@dataclass
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    optim: OptimConfig = field(default_factory=OptimConfig)
    prune: PruneConfig = field(default_factory=PruneConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def to_json_dict(self) -> dict:
        d = dataclasses.asdict(self)
        if self.data.sim is not None:
            d["data"]["sim"] = self.data.sim.to_json_dict()
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "RunConfig":
        sections = {
            "data": DataConfig,
            "model": ModelConfig,
            "optim": OptimConfig,
            "prune": PruneConfig,
            "eval": EvalConfig,
        }
        unknown = set(d) - set(sections)
        if unknown:
            raise ValueError("unknown config sections: %s" % sorted(unknown))
        kwargs = {}
        for name, typ in sections.items():
            sub = dict(d.get(name, {}))
            fields = {f.name for f in dataclasses.fields(typ)}
            bad = set(sub) - fields
            if bad:
                raise ValueError("unknown keys in config section '%s': %s"
                                 % (name, sorted(bad)))
            if name == "data" and sub.get("sim") is not None:
                sub["sim"] = SimConfig.from_json_dict(sub["sim"])
            kwargs[name] = typ(**sub)
        return cls(**kwargs)

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=1)

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))
