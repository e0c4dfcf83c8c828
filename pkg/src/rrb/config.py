"""All run defaults in one place; the CLI prints this with --print-config."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

from .gradcheck import GradcheckConfig
from .optimize import (DEFAULT_TRANSLATION_PERTURB, VIEWNET_AZIMUTH_DEG,
                       VIEWNET_ELEVATION_DEG, OptimizerOptions)
from .raster import RenderConfig


@dataclass(frozen=True)
class PerturbConfig:
    azimuth_deg: float = VIEWNET_AZIMUTH_DEG
    elevation_deg: float = VIEWNET_ELEVATION_DEG
    translation_m: float = DEFAULT_TRANSLATION_PERTURB

    def __post_init__(self):
        if min(self.azimuth_deg, self.elevation_deg, self.translation_m) < 0:
            raise ValueError("perturbation magnitudes must be non-negative")


@dataclass(frozen=True)
class ScaleConfig:
    tol: float = 0.5
    max_steps: int = 60
    s_lo: float = 0.05
    s_hi: float = 20.0

    def __post_init__(self):
        if not (self.tol > 0 and 0 < self.s_lo < self.s_hi and self.max_steps >= 1):
            raise ValueError("scale search needs tol > 0, 0 < s_lo < s_hi, max_steps >= 1")


@dataclass(frozen=True)
class RunConfig:
    render: RenderConfig = field(default_factory=RenderConfig)
    optimizer: OptimizerOptions = field(default_factory=OptimizerOptions)
    perturb: PerturbConfig = field(default_factory=PerturbConfig)
    scale: ScaleConfig = field(default_factory=ScaleConfig)
    gradcheck: GradcheckConfig = field(default_factory=GradcheckConfig)
    lock_height: bool = True
    # reference masks are thresholded at 128/255 before the loss
    binarize: bool = True
    seed: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)
