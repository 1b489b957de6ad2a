"""Schema-versioned experiment configuration."""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError

__all__ = [
    "SCHEMA_VERSION",
    "ChartConfig",
    "ExperimentConfig",
    "load_config",
    "config_hash",
]

SCHEMA_VERSION = 1


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


def _range(v):
    if len(v) != 2 or not v[0] < v[1]:
        raise ValueError("range must be [lo, hi] with lo < hi")
    return v


class ChartConfig(_Strict):
    id: int
    I_range: tuple[float, float]
    E_range: tuple[float, float]
    gamma: float = Field(1e-3, gt=0)
    phase: tuple[float, float] = (0.0, 0.0)

    _check = field_validator("I_range", "E_range")(_range)

    def spec(self):
        from .action_angle import ChartSpec
        return ChartSpec(self.id, tuple(self.I_range), tuple(self.E_range), self.gamma,
                         tuple(self.phase))


REFERENCE_CHART = ChartConfig(id=1, I_range=(0.15, 0.35), E_range=(0.3, 0.7))
NEIGHBOUR_CHART = ChartConfig(id=2, I_range=(0.25, 0.45), E_range=(0.3, 0.7), phase=(0.3, -0.2))


class DiophantineConfig(_Strict):
    gamma: float = Field(1e-3, ge=0)
    tau: float = Field(1.5, gt=1)
    k_max: int = Field(200, ge=10)
    gamma_tilde: Optional[float] = Field(None, ge=0)

    def params(self):
        from .diophantine import DiophantineParams
        return DiophantineParams(self.gamma, self.tau, self.k_max, self.gamma_tilde)


class KamBlock(_Strict):
    N: int = 64
    newton_tol: float = Field(1e-10, gt=0)
    max_newton: int = Field(12, ge=1)
    tail_tol: float = Field(1e-8, gt=0)
    smallness_guard: Optional[float] = Field(None, gt=0)

    @field_validator("N")
    @classmethod
    def _pow2(cls, n):
        if n < 32 or n & (n - 1):
            raise ValueError("N must be a power of two >= 32")
        return n

    def kam(self):
        from .kam import KamConfig
        return KamConfig(self.newton_tol, self.max_newton, self.N, self.tail_tol,
                         self.smallness_guard)


class BifurcationConfig(_Strict):
    I_range: tuple[float, float] = (-1.5, 1.5)
    E_range: tuple[float, float] = (-1.2, 2.0)
    shape: tuple[int, int] = (61, 65)
    tol: float = Field(1e-10, gt=0)

    _check = field_validator("I_range", "E_range")(_range)


class FreqmapConfig(_Strict):
    I_range: tuple[float, float] = (0.05, 0.6)
    E_range: tuple[float, float] = (-0.5, 0.8)
    shape: tuple[int, int] = (40, 40)
    h: float = Field(1e-4, gt=0)

    _check = field_validator("I_range", "E_range")(_range)


class DiophantineRun(_Strict):
    chart: ChartConfig = REFERENCE_CHART
    params: DiophantineConfig = DiophantineConfig()
    shape: tuple[int, int] = (20, 20)
    samples: int = Field(10_000, ge=1000)
    seed: int = Field(0, ge=0)


class LoopConfig(_Strict):
    kind: Literal["circle", "polygon"] = "circle"
    center: tuple[float, float] = (0.0, 1.0)
    radius: float = Field(0.3, gt=0)
    n: int = Field(64, ge=8)
    turns: int = 1
    vertices: Optional[list[tuple[float, float]]] = None

    @model_validator(mode="after")
    def _vertices(self):
        if self.kind == "polygon" and not self.vertices:
            raise ValueError("polygon loops need vertices")
        return self

    def loop(self):
        from .monodromy import LoopPath
        if self.kind == "circle":
            return LoopPath.circle(self.center, self.radius, self.n, self.turns)
        return LoopPath.polygon(self.vertices)


class MonodromyConfig(_Strict):
    loop: LoopConfig = LoopConfig()


class SolveToriConfig(_Strict):
    chart: ChartConfig = REFERENCE_CHART
    params: DiophantineConfig = DiophantineConfig()
    kam: KamBlock = KamBlock()
    epsilon: float = Field(1e-3, ge=0)
    perturbation_id: int = 1
    shape: tuple[int, int] = (10, 10)
    validate_t_end: float = Field(100.0, ge=0)
    validate_points: int = Field(2, ge=1)
    calibrate_guard: bool = False


class GlueConfig(_Strict):
    charts: list[ChartConfig] = [REFERENCE_CHART, NEIGHBOUR_CHART]
    params: DiophantineConfig = DiophantineConfig()
    kam: KamBlock = KamBlock()
    epsilon: float = Field(1e-3, ge=0)
    perturbation_id: int = 1
    inset: float = Field(0.05, gt=0, lt=0.5)
    n_tori: int = Field(5, ge=1)
    n_points: int = Field(4, ge=1)
    t_end: float = Field(50.0, gt=0)
    seed: int = Field(0, ge=0)
    partition_shape: tuple[int, int] = (41, 21)


class VerifyFreqConfig(_Strict):
    n_values: int = Field(20, ge=1)
    I_range: tuple[float, float] = (0.05, 0.8)
    E_range: tuple[float, float] = (-0.6, 1.6)
    t_end: float = Field(500.0, gt=0)
    h: float = Field(5e-3, gt=0)
    dt_sample: float = Field(0.05, gt=0)
    seed: int = Field(0, ge=0)

    _check = field_validator("I_range", "E_range")(_range)


class ExperimentConfig(_Strict):
    schema_version: Literal[1] = SCHEMA_VERSION
    bifurcation: BifurcationConfig = BifurcationConfig()
    freqmap: FreqmapConfig = FreqmapConfig()
    diophantine: DiophantineRun = DiophantineRun()
    monodromy: MonodromyConfig = MonodromyConfig()
    solve_tori: SolveToriConfig = SolveToriConfig()
    glue: GlueConfig = GlueConfig()
    verify_freq: VerifyFreqConfig = VerifyFreqConfig()


def load_config(path=None):
    """Parse and validate a JSON config; ``None`` gives the defaults."""
    try:
        if path is None:
            return ExperimentConfig()
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return ExperimentConfig.model_validate(raw)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except ValidationError as exc:
        raise ConfigError(f"invalid config {path}:\n{exc}") from exc


def config_hash(block):
    """SHA-256 of the canonical JSON of a config block."""
    text = json.dumps(block.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
