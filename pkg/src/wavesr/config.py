"""Run configuration: bracketed sections of ``key = value`` lines.

Every key is optional. Unknown sections or keys are rejected by name, and
``RunConfig.to_text()`` renders the effective configuration (defaults
applied) so it can be embedded in checkpoints and reports.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field, replace
from pathlib import Path

from .data import DatasetSpec
from .errors import ConfigError
from .losses import LossConfig
from .metrics import SsimConfig
from .networks import CriticConfig, GeneratorConfig, PerceptualEncoderConfig, _coerce
from .trainer import ExperimentConfig, TrainConfig

# section name -> (RunConfig attribute, dataclass)
SECTIONS = {
    "dataset": ("dataset", DatasetSpec),
    "model": ("generator", GeneratorConfig),
    "critic": ("critic", CriticConfig),
    "train": ("train", TrainConfig),
    "loss": ("loss", LossConfig),
    "metrics": ("metrics", SsimConfig),
    "perceptual": ("perceptual", PerceptualEncoderConfig),
}


@dataclass
class RunConfig:
    name: str = "run"
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    critic: CriticConfig = field(default_factory=CriticConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    metrics: SsimConfig = field(default_factory=SsimConfig)
    perceptual: PerceptualEncoderConfig = field(default_factory=PerceptualEncoderConfig)

    def experiment(self) -> ExperimentConfig:
        return ExperimentConfig(
            name=self.name,
            generator=self.generator,
            critic=self.critic,
            train=replace(self.train, loss=self.loss),
        )

    def with_overrides(self, seed=None, mode=None, scale=None) -> RunConfig:
        cfg = self
        try:
            if seed is not None:
                cfg = replace(cfg, train=replace(cfg.train, seed=seed), dataset=replace(cfg.dataset, seed=seed))
            if mode is not None:
                cfg = replace(cfg, generator=replace(cfg.generator, mode=mode), dataset=replace(cfg.dataset, mode=mode))
            if scale is not None:
                cfg = replace(cfg, generator=replace(cfg.generator, scale=scale), dataset=replace(cfg.dataset, scale=scale))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return cfg

    def to_text(self) -> str:
        lines = [f"name = {self.name}", ""]
        for section, (attr, _) in SECTIONS.items():
            lines.append(f"[{section}]")
            obj = getattr(self, attr)
            for f in dataclasses.fields(obj):
                if f.name == "loss" and attr == "train":
                    continue
                v = getattr(obj, f.name)
                if isinstance(v, tuple):
                    v = ",".join(map(str, v))
                lines.append(f"{f.name} = {v}")
            lines.append("")
        return "\n".join(lines)

    def manifest_entries(self) -> dict[str, str]:
        """The effective config flattened for a checkpoint manifest."""
        out = {"config.name": self.name}
        for section, (attr, _) in SECTIONS.items():
            obj = getattr(self, attr)
            for f in dataclasses.fields(obj):
                if f.name == "loss" and attr == "train":
                    continue
                v = getattr(obj, f.name)
                out[f"config.{section}.{f.name}"] = ",".join(map(str, v)) if isinstance(v, tuple) else str(v)
        return out


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    parser = configparser.ConfigParser(
        interpolation=None, default_section="__none__", delimiters=("=",), comment_prefixes=("#", ";")
    )
    parser.optionxform = str  # keep key case so error messages quote the file
    try:
        parser.read_string("[__top__]\n" + text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc

    parts: dict[str, object] = {}
    name = "run"
    for section in parser.sections():
        items = dict(parser.items(section))
        if section == "__top__":
            for key, value in items.items():
                if key != "name":
                    raise ConfigError(f"{source}: unknown key {key!r} outside any section", key)
                name = value
            continue
        if section not in SECTIONS:
            raise ConfigError(f"{source}: unknown section [{section}]", section)
        attr, cls = SECTIONS[section]
        defaults = cls()
        known = {f.name for f in dataclasses.fields(cls)} - {"loss"}
        kwargs = {}
        for key, value in items.items():
            if key not in known:
                raise ConfigError(f"{source}: unknown key {key!r} in [{section}]", key)
            try:
                kwargs[key] = _coerce(value, getattr(defaults, key))
            except ValueError as exc:
                raise ConfigError(f"{source}: bad value for {key!r} in [{section}]: {exc}", key) from exc
        try:
            parts[attr] = cls(**kwargs)
        except ValueError as exc:
            raise ConfigError(f"{source}: [{section}] {exc}", section) from exc
    try:
        return RunConfig(name=name, **parts)
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, str(path))
