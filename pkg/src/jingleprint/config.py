"""Tunables with layered precedence: defaults < config file < command line.

Config files hold ``key=value`` lines; ``#`` starts a comment.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .catalogue import DEFAULT_TH_CCV, DEFAULT_TH_POI
from .poi import DEFAULT_THRE_DIST, DEFAULT_THRE_HARRIS
from .signature import DEFAULT_N_FRAME, DEFAULT_T_STEP, DescriptorParams


class ConfigError(ValueError):
    pass


@dataclass
class Config:
    n_color: int = 64
    tau: int | None = None
    q: float = 32.0
    k: float = 0.04
    sigma: float = 1.0
    n_poi: int = 50
    nms: int = 3
    th_ccv: float = DEFAULT_TH_CCV
    th_poi: float = DEFAULT_TH_POI
    w_ccv: float = 1.0
    w_poi: float = 1.0
    n_frame: int = DEFAULT_N_FRAME
    t_step: int = DEFAULT_T_STEP
    stride: int = 1
    thre_dist: float = DEFAULT_THRE_DIST
    thre_harris: float = DEFAULT_THRE_HARRIS
    jobs: int = 1

    def validate(self) -> "Config":
        try:
            self.descriptor_params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        checks = [
            (0 <= self.th_ccv <= 1, "th_ccv must lie in [0, 1]"),
            (0 <= self.th_poi <= 1, "th_poi must lie in [0, 1]"),
            (self.w_ccv >= 0 and self.w_poi >= 0 and self.w_ccv + self.w_poi > 0,
             "weights must be non-negative with a positive sum"),
            (self.n_frame >= 1, "n_frame must be >= 1"),
            (self.t_step >= 1, "t_step must be >= 1"),
            (self.stride >= 1, "stride must be >= 1"),
            (self.thre_dist > 0, "thre_dist must be positive"),
            (self.thre_harris > 0, "thre_harris must be positive"),
            (self.jobs >= 1, "jobs must be >= 1"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)
        return self

    def descriptor_params(self) -> DescriptorParams:
        return DescriptorParams(self.n_color, self.tau, self.q, self.k, self.sigma,
                                self.n_poi, self.nms)

    def update(self, values: dict) -> "Config":
        known = {f.name for f in fields(self)}
        for key, value in values.items():
            if value is None:
                continue
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            setattr(self, key, value)
        return self


def _coerce(key: str, text: str):
    ftype = {f.name: f.type for f in fields(Config)}[key]
    if text.lower() in ("none", "auto", "") and "None" in str(ftype):
        return None
    try:
        if "int" in str(ftype):
            return int(text)
        return float(text)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {text!r}") from None


def read_config(path: str | Path) -> dict:
    values = {}
    known = {f.name for f in fields(Config)}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        if key not in known:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _coerce(key, value.strip())
    return values


def layered(config_path: str | Path | None, flags: dict) -> Config:
    """Defaults, overlaid by the config file, overlaid by explicit flags."""
    cfg = Config()
    if config_path is not None:
        cfg.update(read_config(config_path))
    cfg.update({k: v for k, v in flags.items() if k in {f.name for f in fields(Config)}})
    return cfg.validate()
