"""Experiment configuration: a TOML file validated into pydantic models.

Unknown keys are rejected everywhere. ``load_config`` returns an
:class:`ExperimentConfig`; ``config_hash`` is the SHA-256 of its canonical
JSON dump and is stamped into every output file.
"""
import hashlib
import json
import math
from importlib import resources
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

import numpy as np
import tomli
from pydantic import (
    BaseModel, ConfigDict, Field, PrivateAttr, ValidationError, field_validator, model_validator,
)

from rsma_krr import geometry as geo
from rsma_krr.kernels import DEFAULT_SOUND_SPEED, SourceRegion, WaveContext
from rsma_krr.mdopt import MdOptConfig
from rsma_krr.simulation import NoiseSpec, PointSource, SourceScene

METHOD_KINDS = ("swf", "krr", "proposed", "proposed_md")


class ConfigError(ValueError):
    """Raised for any invalid experiment configuration."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SourceCfg(_Strict):
    position: Tuple[float, float, float]
    amplitude: Tuple[float, float] = (1.0, 0.0)  # real, imaginary


class ArrayCfg(_Strict):
    radius: float = Field(0.05, gt=0)
    layout: str = "tdesign60"  # or a CSV path with x,y,z columns on the unit sphere

    def build(self, base_dir=None):
        if self.layout == "tdesign60":
            return geo.default_array(self.radius)
        path = Path(self.layout)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        return geo.load_array_csv(path, self.radius)


class NoiseCfg(_Strict):
    snr_db: Union[float, Literal["inf"]] = 20.0

    @property
    def snr(self):
        return math.inf if self.snr_db == "inf" else float(self.snr_db)


class FrequencyCfg(_Strict):
    values: Optional[List[float]] = None
    start: float = 100.0
    stop: float = 2000.0
    step: float = 100.0

    @model_validator(mode="after")
    def _check(self):
        if self.values is not None:
            if not self.values or min(self.values) <= 0:
                raise ValueError("frequency values must be positive and non-empty")
        elif not (0 < self.start <= self.stop and self.step > 0):
            raise ValueError("need 0 < start <= stop and step > 0")
        return self

    def grid(self):
        if self.values is not None:
            return [float(f) for f in self.values]
        n = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return [float(self.start + i * self.step) for i in range(n)]


class EvalCfg(_Strict):
    kind: Literal["ball", "box"] = "ball"
    radius: float = Field(0.175, gt=0)
    n_points: int = Field(1000, ge=1)
    seed: int = 0
    extents: Tuple[float, float, float] = (0.35, 0.35, 0.20)
    spacing: float = Field(0.05, gt=0)

    def region(self):
        if self.kind == "ball":
            return geo.Ball(self.radius, self.n_points, self.seed)
        return geo.BoxGrid(self.extents, self.spacing)


class PlaneCfg(_Strict):
    axes: Literal["xy", "yz", "xz"] = "xy"
    extent: float = Field(0.35, gt=0)
    spacing: float = Field(0.005, gt=0)
    fixed: float = 0.0


class LambdaGridCfg(_Strict):
    l_min: int = -10
    l_max: int = 5

    @model_validator(mode="after")
    def _check(self):
        if self.l_min > self.l_max:
            raise ValueError("l_min must not exceed l_max")
        return self

    def values(self):
        return [10.0 ** l for l in range(self.l_min, self.l_max + 1)]


class MdOptCfg(_Strict):
    tau: float = Field(1e-2, gt=0)
    eta_gamma: float = Field(1e-1, gt=0)
    eta_zeta: float = Field(1e2, gt=0)
    iterations: int = Field(400, ge=0)
    lambda_fixed: float = Field(1e-2, gt=0)
    zeta_init: float = Field(20.0, ge=0)

    def build(self):
        return MdOptConfig(tau=self.tau, eta_gamma=self.eta_gamma, eta_zeta=self.eta_zeta,
                           iterations=self.iterations, lambda_fixed=self.lambda_fixed,
                           zeta_init=self.zeta_init)


class MethodCfg(_Strict):
    id: str
    kind: Literal["swf", "krr", "proposed", "proposed_md"]
    order: int = Field(5, ge=0, le=64)
    n_ext: int = Field(5, ge=0, le=64)
    weight_mode: Literal["analytic", "unit"] = "analytic"
    q_mode: Literal["kernel_norms", "identity"] = "kernel_norms"
    w_mode: Literal["identity", "inverse_sr"] = "identity"
    lambda_search: Literal["shared", "joint", "fixed"] = "shared"
    lambda_fixed: float = Field(1e-2, gt=0)

    @field_validator("id")
    @classmethod
    def _id(cls, v):
        if not v or not all(c.isalnum() or c in "_-" for c in v):
            raise ValueError("method ids use letters, digits, '_' and '-' only")
        return v

    @model_validator(mode="after")
    def _check(self):
        if self.kind == "swf" and self.lambda_search == "joint":
            raise ValueError("swf has a single regularization parameter")
        if self.kind == "proposed_md" and self.q_mode != "identity":
            raise ValueError("proposed_md uses q_mode = 'identity'")
        return self


class IngestCfg(_Strict):
    array_ir: str
    eval_ir: Optional[str] = None
    fade_len: int = Field(0, ge=0)
    radius: Optional[float] = Field(None, gt=0)


def _default_methods():
    return [
        MethodCfg(id="swf", kind="swf"),
        MethodCfg(id="krr", kind="krr"),
        MethodCfg(id="proposed", kind="proposed"),
        MethodCfg(id="proposed_noweight", kind="proposed", weight_mode="unit"),
        MethodCfg(id="proposed_md", kind="proposed_md", q_mode="identity", lambda_search="fixed"),
    ]


class ExperimentConfig(_Strict):
    seed: int = 0
    sound_speed: float = Field(DEFAULT_SOUND_SPEED, gt=0)
    sim_order: int = Field(50, ge=1, le=64)
    sources: List[SourceCfg] = Field(default_factory=lambda: [SourceCfg(position=(3.0, 0.0, 0.0))])
    array: ArrayCfg = ArrayCfg()
    noise: NoiseCfg = NoiseCfg()
    frequencies: FrequencyCfg = FrequencyCfg()
    eval: EvalCfg = EvalCfg()
    plane: PlaneCfg = PlaneCfg()
    lambda_grid: LambdaGridCfg = LambdaGridCfg()
    mdopt: MdOptCfg = MdOptCfg()
    methods: List[MethodCfg] = Field(default_factory=_default_methods)
    ingest: Optional[IngestCfg] = None
    _base_dir: Optional[Path] = PrivateAttr(default=None)

    @model_validator(mode="after")
    def _check(self):
        if not self.sources:
            raise ValueError("at least one source is required")
        for src in self.sources:
            if np.linalg.norm(src.position) <= self.array.radius:
                raise ValueError(f"source at {src.position} lies inside the array sphere")
            if self.eval.kind == "ball" and np.linalg.norm(src.position) <= self.eval.radius:
                raise ValueError(f"source at {src.position} lies inside the evaluation ball")
        ids = [m.id for m in self.methods]
        if len(set(ids)) != len(ids):
            raise ValueError("method ids must be unique")
        if not ids:
            raise ValueError("the method roster is empty")
        return self

    # -- builders -----------------------------------------------------------
    def scene(self):
        return SourceScene(tuple(PointSource(tuple(s.position), complex(*s.amplitude))
                                 for s in self.sources))

    def ctx(self, frequency):
        return WaveContext(float(frequency), self.sound_speed)

    def noise_spec(self, frequency):
        """Noise seeded per frequency so cells are independent of sweep order."""
        seed = np.random.SeedSequence([self.seed, int(round(frequency * 1000))]).generate_state(1)[0]
        return NoiseSpec(self.noise.snr, int(seed))

    def sct_spec(self, method):
        return SourceRegion(self.array.radius, method.n_ext, method.weight_mode)

    def method(self, method_id):
        for m in self.methods:
            if m.id == method_id:
                return m
        raise ConfigError(f"unknown method {method_id!r}; roster is {[m.id for m in self.methods]}")

    def select_methods(self, ids):
        return self.model_copy(update={"methods": [self.method(i) for i in ids]})

    def with_overrides(self, seed=None, frequency=None):
        update = {}
        if seed is not None:
            update["seed"] = int(seed)
        if frequency is not None:
            update["frequencies"] = FrequencyCfg(values=[float(frequency)])
        return self.model_copy(update=update)

    @property
    def base_dir(self):
        """Directory that relative paths in the file are resolved against."""
        return self._base_dir


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


def config_hash(cfg):
    return hashlib.sha256(canonical_json(cfg.model_dump(mode="json")).encode()).hexdigest()


def parse_config(data, base_dir=None):
    try:
        cfg = ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from None
    cfg._base_dir = None if base_dir is None else Path(base_dir)
    return cfg


def load_config(path=None):
    """Read a TOML config; ``None`` loads the bundled defaults."""
    if path is None:
        text = resources.files("rsma_krr").joinpath("defaults.toml").read_text()
        base = None
    else:
        path = Path(path)
        text = path.read_text()
        base = path.parent
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path or 'defaults'}: {exc}") from None
    return parse_config(data, base)
