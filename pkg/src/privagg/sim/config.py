"""Scenario configuration loaded from TOML."""
from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

# section -> keys; every field of ScenarioConfig is addressable exactly once
SECTIONS = {
    "scenario": ("households", "horizon", "start_hour", "seed", "traces", "out_dir"),
    "timing": ("control_dt", "forecast_dt", "target_dt", "discard"),
    "controller": ("sigma1", "sigma2", "r"),
    "privacy": ("window", "m", "n", "eps", "mu", "mu_min", "mu_max", "mu_seed"),
    "battery": ("capacity", "max_charge", "max_discharge", "efficiency", "soc0"),
    "target": ("reserve", "target_seed", "correlation_time"),
    "data": ("trace_seed",),
    "measurement": ("noise_std", "noise_seed"),
    "output": ("resolutions", "svg"),
}


@dataclass(frozen=True)
class ScenarioConfig:
    households: int = 20
    horizon: float = 14400.0
    start_hour: float = 16.0
    seed: int = 0
    traces: str | None = None
    out_dir: str = "results"

    control_dt: float = 1.0
    forecast_dt: float = 5.0
    target_dt: float = 5.0
    discard: float = 1800.0

    sigma1: float = 5.0
    sigma2: float = 1e-4
    r: float = 0.012

    window: int = 901
    m: int = 15
    n: int = 15
    eps: float = 0.1
    mu: tuple = ()
    mu_min: int = 1
    mu_max: int = 9
    mu_seed: int | None = None

    capacity: float = 6.4
    max_charge: float = 3.3
    max_discharge: float = 3.3
    efficiency: float = 0.96
    soc0: float = 3.2

    reserve: float = 0.15
    target_seed: int | None = None
    correlation_time: float = 120.0

    trace_seed: int | None = None

    noise_std: float = 0.0
    noise_seed: int | None = None

    resolutions: tuple = (1, 60, 300)
    svg: bool = False

    def __post_init__(self):
        if self.households < 1:
            raise ValueError("households must be >= 1")
        if self.mu and len(self.mu) != self.households:
            raise ValueError(f"mu lists {len(self.mu)} prices for {self.households} households")
        if self.mu_min > self.mu_max or self.mu_min < 0:
            raise ValueError("need 0 <= mu_min <= mu_max")
        if self.window < 1 or self.m < 1 or self.n < 1:
            raise ValueError("window, m and n must be positive")
        if any(int(r) != r or r < 1 for r in self.resolutions):
            raise ValueError("resolutions must be positive integers (seconds)")
        if not 0.0 <= self.soc0 <= self.capacity:
            raise ValueError("initial state of charge outside [0, capacity]")

    def sub_seed(self, name: str) -> int:
        """Explicit seed for ``name`` or one derived from the master seed."""
        explicit = getattr(self, f"{name}_seed")
        if explicit is not None:
            return int(explicit)
        tag = {"mu": 1, "target": 2, "trace": 3, "noise": 4}[name]
        return int(np.random.SeedSequence([int(self.seed), tag]).generate_state(1)[0])

    def prices(self) -> np.ndarray:
        if self.mu:
            return np.asarray(self.mu, dtype=float)
        rng = np.random.default_rng(self.sub_seed("mu"))
        return rng.integers(self.mu_min, self.mu_max + 1, size=self.households).astype(float)

    def with_(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        return {sec: {k: d[k] for k in keys if d[k] is not None} for sec, keys in SECTIONS.items()}


_FIELDS = {f.name for f in fields(ScenarioConfig)}
assert _FIELDS == {k for keys in SECTIONS.values() for k in keys}


def config_from_dict(data: dict) -> ScenarioConfig:
    kw = {}
    for section, values in data.items():
        if section not in SECTIONS:
            raise ValueError(f"unknown config section [{section}]")
        if not isinstance(values, dict):
            raise ValueError(f"[{section}] must be a table")
        for key, value in values.items():
            if key not in SECTIONS[section]:
                raise ValueError(f"unknown key '{key}' in [{section}]")
            kw[key] = tuple(value) if isinstance(value, list) else value
    return ScenarioConfig(**kw)


def load_config(path) -> ScenarioConfig:
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ValueError(f"{path}: {exc}") from None
    return config_from_dict(data)
