"""Plain-text pipeline configuration (``key = value`` lines).

Unknown keys are rejected; missing keys take the defaults below, which are
the same defaults every module declares on its own types.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

from .cascade import CascadeParams
from .costvolume import AggregationConfig
from .features import FeatureConfig
from .pseudolabel import AreaFilterConfig


class ConfigError(ValueError):
    """Raised for unknown keys or unparseable values in a config file."""


_INT_KEYS = {
    "d_max", "planes_stage2", "planes_stage1", "census_radius", "groups",
    "area_radius",
}


@dataclass(frozen=True)
class PipelineConfig:
    d_max: int = 256
    planes_stage2: int = 16
    planes_stage1: int = 12
    alpha_stage3: float = 0.0
    alpha_stage2: float = 0.0
    beta_stage3: float = 0.0
    beta_stage2: float = 0.0
    tau: float = 0.25
    sgm_p1: float = 0.1
    sgm_p2: float = 0.5
    census_radius: int = 2
    groups: int = 8
    t_pixel: float = 0.9
    t_area: float = 0.2
    area_radius: int = 7
    area_sigma_color: float = 0.1
    area_sigma_disp: float = 3.0
    area_m: float = 1.0
    area_s: float = 2.0

    def cascade_params(self) -> CascadeParams:
        return CascadeParams(
            d_max=self.d_max,
            planes_stage2=self.planes_stage2,
            planes_stage1=self.planes_stage1,
            alpha_stage3=self.alpha_stage3,
            alpha_stage2=self.alpha_stage2,
            beta_stage3=self.beta_stage3,
            beta_stage2=self.beta_stage2,
            aggregation=AggregationConfig(
                method="sgm", p1=self.sgm_p1, p2=self.sgm_p2, tau=self.tau
            ),
        )

    def feature_config(self) -> FeatureConfig:
        return FeatureConfig(
            census_radius=self.census_radius, group_count=self.groups
        )

    def area_config(self) -> AreaFilterConfig:
        return AreaFilterConfig(
            radius=self.area_radius,
            sigma_color=self.area_sigma_color,
            sigma_disp=self.area_sigma_disp,
            midpoint=self.area_m,
            slope=self.area_s,
        )

    def replace(self, **updates) -> "PipelineConfig":
        return replace(self, **updates)


def parse_config_text(text: str) -> PipelineConfig:
    known = {f.name for f in fields(PipelineConfig)}
    updates = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            updates[key] = int(value) if key in _INT_KEYS else float(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {value!r}") from exc
    return PipelineConfig(**updates)


def read_config_file(path) -> PipelineConfig:
    with open(path, "r", encoding="ascii") as fh:
        return parse_config_text(fh.read())


def write_config_file(config: PipelineConfig, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for f in fields(PipelineConfig):
            fh.write(f"{f.name} = {getattr(config, f.name)!r}\n")
