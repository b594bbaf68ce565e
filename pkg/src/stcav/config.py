"""Scenario configuration: YAML loading, defaults and validation."""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import yaml

from .barriers import BarrierParams
from .dynamics import LANES
from .profile import beta_from_alpha

SCHEMES = ("time_triggered", "time_triggered_modified", "self_triggered")


class ConfigError(ValueError):
    pass


def default_dict() -> dict:
    text = resources.files("stcav").joinpath("data/default.yaml").read_text()
    return yaml.safe_load(text)


@dataclass(frozen=True)
class ScenarioConfig:
    scheme: str
    T_d: float
    T_s: float
    T_max: float
    alpha: float
    rho: float
    seed: int
    arrival_rate: dict
    v0_range: tuple
    max_cavs: Optional[int]
    duration: float
    barrier: BarrierParams
    omega: tuple
    r: tuple
    resolve_profile: bool = False
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def beta(self) -> float:
        return beta_from_alpha(self.alpha, self.barrier.u_min, self.barrier.u_max)

    @property
    def ticks_per_sample(self) -> int:
        return int(round(self.T_s / self.T_d))

    def with_overrides(self, **kw) -> "ScenarioConfig":
        data = copy.deepcopy(self.raw)
        for key, val in kw.items():
            data[key] = val
        return from_dict(data)


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def _num(d: dict, key: str, where: str) -> float:
    try:
        val = float(d[key])
    except KeyError:
        raise ConfigError(f"{where}: missing key {key!r}") from None
    except (TypeError, ValueError):
        raise ConfigError(f"{where}.{key}: expected a number, got {d[key]!r}") from None
    if not math.isfinite(val):
        raise ConfigError(f"{where}.{key}: must be finite")
    return val


def from_dict(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    data = _merge(default_dict(), data)
    known = {"scheme", "T_d", "T_s", "T_max", "alpha", "rho", "seed", "arrivals", "road",
             "fuel", "resolve_profile"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    scheme = data["scheme"]
    if scheme not in SCHEMES:
        raise ConfigError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    T_d = _num(data, "T_d", "config")
    T_s = _num(data, "T_s", "config")
    T_max = _num(data, "T_max", "config")
    alpha = _num(data, "alpha", "config")
    rho = _num(data, "rho", "config")
    if T_d <= 0:
        raise ConfigError(f"T_d must be positive, got {T_d}")
    ratio = T_s / T_d
    if T_s <= 0 or abs(ratio - round(ratio)) > 1e-9:
        raise ConfigError(f"T_s={T_s} must be a positive multiple of T_d={T_d}")
    if T_max < T_d:
        raise ConfigError(f"T_max={T_max} must be at least T_d={T_d}")
    if not 0.0 <= alpha < 1.0:
        raise ConfigError(f"alpha must lie in [0, 1), got {alpha}")
    if rho <= 0:
        raise ConfigError(f"rho must be positive, got {rho}")
    try:
        seed = int(data["seed"])
    except (TypeError, ValueError):
        raise ConfigError(f"seed must be an integer, got {data['seed']!r}") from None

    arr = data["arrivals"]
    if not isinstance(arr, dict) or not isinstance(arr.get("rate"), dict):
        raise ConfigError("arrivals.rate must be a mapping of lane -> rate")
    rate = {}
    for lane in LANES:
        rate[lane] = _num(arr["rate"], lane, "arrivals.rate") if lane in arr["rate"] else 0.0
        if rate[lane] < 0:
            raise ConfigError(f"arrivals.rate.{lane} must be non-negative")
    try:
        lo, hi = (float(q) for q in arr["v0_range"])
    except (TypeError, ValueError):
        raise ConfigError("arrivals.v0_range must be a pair of numbers") from None
    if not 0 < lo <= hi:
        raise ConfigError(f"arrivals.v0_range must satisfy 0 < lo <= hi, got {[lo, hi]}")
    max_cavs = arr.get("max_cavs")
    if max_cavs is not None:
        if not isinstance(max_cavs, int) or max_cavs < 0:
            raise ConfigError("arrivals.max_cavs must be a non-negative integer")
    duration = _num(arr, "duration", "arrivals")

    road = data["road"]
    g = _num(road, "g", "road")
    try:
        barrier = BarrierParams(
            psi=_num(road, "psi", "road"), l=_num(road, "l", "road"), L=_num(road, "L", "road"),
            v_min=_num(road, "v_min", "road"), v_max=_num(road, "v_max", "road"),
            u_min=-_num(road, "c_d", "road") * g, u_max=_num(road, "c_a", "road") * g,
            c3=_num(road, "c3", "road"), T_d=T_d,
        )
    except ValueError as exc:
        raise ConfigError(f"road: {exc}") from None
    if hi > barrier.v_max or lo < barrier.v_min:
        raise ConfigError("arrivals.v0_range must lie inside [v_min, v_max]")

    fuel = data["fuel"]
    try:
        omega = tuple(float(q) for q in fuel["omega"])
        r = tuple(float(q) for q in fuel["r"])
    except (KeyError, TypeError, ValueError):
        raise ConfigError("fuel.omega and fuel.r must be lists of numbers") from None
    if len(omega) != 4 or len(r) != 3:
        raise ConfigError("fuel.omega needs 4 coefficients and fuel.r needs 3")

    return ScenarioConfig(
        scheme=scheme, T_d=T_d, T_s=T_s, T_max=T_max, alpha=alpha, rho=rho, seed=seed,
        arrival_rate=rate, v0_range=(lo, hi), max_cavs=max_cavs, duration=duration,
        barrier=barrier, omega=omega, r=r, resolve_profile=bool(data["resolve_profile"]),
        raw=data,
    )


def load_config(path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None
    return from_dict(data if data is not None else {})


def default_config(**overrides) -> ScenarioConfig:
    return from_dict(overrides)
