"""Run configuration: a single JSON document, unit-suffixed keys, unknown keys rejected.

Frequencies ending in ``_thz`` are ordinary frequencies (the angular value is
``2 pi`` times larger).  The resolved configuration written to every result
bundle contains every default explicitly.
"""
from __future__ import annotations

import json
import math
import re
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import source, spectral
from .source import SourceConfig, SpliceErrors


class ConfigError(ValueError):
    """Invalid configuration; the message carries line-level diagnostics."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SpliceSection(_Strict):
    ppsf_l1: float = 0.0
    l1_l1p: float = 0.0
    l1p_pbs: float = 0.0
    ppsf_l2: float = 0.0
    l2_l2p: float = 0.0
    l2p_pbs: float = 0.0


class SourceSection(_Strict):
    length_m: float = Field(1.0, ge=0)
    alpha1_mm: float = 0.0
    alpha2_mm: float = 0.0
    beta_mm: float = 0.0
    pump_split: float = Field(0.5, ge=0, le=1)
    pump_phase1_deg: float = 0.0
    pump_phase2_deg: float = 0.0
    splice_errors_deg: SpliceSection = SpliceSection()
    birefringence: float = Field(source.CALIBRATED_BIREFRINGENCE, gt=0)
    n_eff: float = Field(source.N_EFF, gt=0)

    def build(self) -> SourceConfig:
        rad = math.radians
        sp = self.splice_errors_deg
        return SourceConfig.from_mismatch(
            self.length_m,
            alpha1=self.alpha1_mm * 1e-3,
            alpha2=self.alpha2_mm * 1e-3,
            beta=self.beta_mm * 1e-3,
            splice=SpliceErrors(rad(sp.ppsf_l1), rad(sp.l1_l1p), rad(sp.l1p_pbs),
                                rad(sp.ppsf_l2), rad(sp.l2_l2p), rad(sp.l2p_pbs)),
            pump_split=self.pump_split,
            pump_phase1=rad(self.pump_phase1_deg),
            pump_phase2=rad(self.pump_phase2_deg),
            birefringence=self.birefringence,
            n_eff=self.n_eff,
        )


class DelayGrid(_Strict):
    start_ps: float = -10.0
    stop_ps: float = 10.0
    step_ps: float = Field(0.25, gt=0)

    @model_validator(mode="after")
    def _nonempty(self):
        if not self.stop_ps > self.start_ps:
            raise ValueError("empty delay grid: stop_ps must exceed start_ps")
        return self

    def delays(self):
        import numpy as np

        n = int(math.floor((self.stop_ps - self.start_ps) / self.step_ps + 1e-9))
        return (self.start_ps + self.step_ps * np.arange(n + 1)) * 1e-12


class HomiSection(_Strict):
    channel: int = Field(1, ge=1, le=4)
    visibility: float = Field(0.988, ge=0, le=1)
    phases_deg: list[float] = Field(default_factory=lambda: [0.0, 90.0, 180.0, 270.0], min_length=1)
    delays: DelayGrid = DelayGrid()
    pairs_per_point: float = Field(1000.0, gt=0)


class QstSection(_Strict):
    channels: list[int] = Field(default_factory=lambda: [1, 2, 3, 4], min_length=1)
    phases_deg: list[float] = Field(default_factory=lambda: [0.0, 45.0, 90.0, 135.0, 180.0, 225.0, 270.0, 315.0],
                                    min_length=1)
    pairs_per_setting: float = Field(1000.0, gt=0)
    mle: bool = False

    @model_validator(mode="after")
    def _channels(self):
        bad = [c for c in self.channels if c not in (1, 2, 3, 4)]
        if bad:
            raise ValueError(f"channels must be in 1..4, got {bad}")
        return self


class JointSection(_Strict):
    channel: int = Field(1, ge=1, le=4)
    visibility: float = Field(0.988, ge=0, le=1)
    phi_freq_deg: float = 180.0
    delays: DelayGrid = DelayGrid()
    pairs_per_point: float = Field(1000.0, gt=0)
    pairs_per_setting: float = Field(1000.0, gt=0)
    bin_pairs: float = Field(2000.0, gt=0)


class AxisGrid(_Strict):
    start: float
    stop: float
    num: int = Field(ge=1)

    @model_validator(mode="after")
    def _width(self):
        if self.num > 1 and self.stop == self.start:
            raise ValueError("zero-width axis grid: start equals stop")
        if self.num == 1 and self.start != self.stop:
            raise ValueError("a single-point grid needs start == stop")
        return self

    def values(self):
        import numpy as np

        return np.linspace(self.start, self.stop, self.num)


class SweepSection(_Strict):
    axis: Literal["length", "angle", "pump", "bandwidth"] = "length"
    detuning_thz: float = Field(3.3, gt=0)
    bin_width_nm: float = Field(1.0, gt=0)
    grid_points: int = Field(2048, ge=64)
    length_mm: AxisGrid = AxisGrid(start=-10.0, stop=10.0, num=21)
    angle_deg: AxisGrid = AxisGrid(start=0.0, stop=8.0, num=9)
    pump_split: AxisGrid = AxisGrid(start=0.3, stop=0.7, num=41)
    bandwidth_thz: AxisGrid = AxisGrid(start=0.2, stop=4.0, num=20)

    @model_validator(mode="after")
    def _positive_bandwidth(self):
        if self.bandwidth_thz.start <= 0 or self.bandwidth_thz.stop <= 0:
            raise ValueError("bandwidth grid must be positive")
        return self

    def filter(self) -> spectral.FilterSpec:
        return spectral.make_two_bin_filter(self.detuning_thz * spectral.THZ,
                                            spectral.nm_to_omega_width(self.bin_width_nm))


class RunConfig(_Strict):
    seed: int = Field(20210, ge=0, lt=2**64)
    noiseless: bool = False
    grid_points: int = Field(2048, ge=64)
    source: SourceSection = SourceSection()
    homi_scan: HomiSection = HomiSection()
    qst: QstSection = QstSection()
    joint: JointSection = JointSection()
    sweep: SweepSection = SweepSection()

    def resolved(self) -> dict:
        return self.model_dump(mode="json")

    def dumps(self) -> str:
        return json.dumps(self.resolved(), indent=2, sort_keys=True) + "\n"


def _line_of(text: str, loc: tuple) -> int | None:
    """Best-effort line number of the innermost string key in ``loc``."""
    keys = [k for k in loc if isinstance(k, str)]
    lines = text.splitlines()
    start = 0
    found = None
    for key in keys:
        pat = re.compile(r'"%s"\s*:' % re.escape(key))
        for i in range(start, len(lines)):
            if pat.search(lines[i]):
                found, start = i + 1, i
                break
    return found


def parse_config(text: str, overrides: dict | None = None) -> RunConfig:
    """Parse and validate a JSON config; raise :class:`ConfigError` with line numbers."""
    try:
        raw = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: invalid JSON: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("line 1: top level must be a JSON object")
    raw.update(overrides or {})
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        msgs = []
        for err in exc.errors():
            loc = tuple(err["loc"])
            line = _line_of(text, loc)
            where = f"line {line}" if line else "line ?"
            msgs.append(f"{where}: {'.'.join(str(p) for p in loc) or '<root>'}: {err['msg']}")
        raise ConfigError("\n".join(msgs)) from exc


def load_config(path: str, overrides: dict | None = None) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), overrides)
