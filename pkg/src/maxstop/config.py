"""Problem configuration: flat [section] key=value files.

The grammar is a restricted INI dialect (configparser-compatible): sections
[model], [reward], [grids], [mc], [output]; values are numbers, booleans,
strings, or comma-separated pairs.  `dumps` emits a canonical form that
re-parses to an equal ProblemConfig.
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field
from typing import Optional

from .diffusion import Kind, Model, ModelSpec, make_model
from .errors import ConfigError
from .mc import MCConfig
from .reward import (RewardSpec, lookback_reward, power_sum_reward,
                     put_reward, russian_reward)

_MODEL_KEYS = {"kind", "mu", "sigma", "q", "interval_l", "interval_r", "anchor"}
_REWARD_KEYS = {"name", "a", "b", "k", "K"}
_GRID_KEYS = {"s_min", "s_max", "n_s", "n_x"}
_MC_KEYS = {"n_paths", "dt", "t_max", "seed", "antithetic",
            "continuity_correction", "points"}
_OUTPUT_KEYS = {"dir"}

_REWARD_PARAMS = {
    "power_sum": ("a", "b", "k", "K"),
    "lookback": ("k",),
    "put": ("K",),
    "russian": (),
}


@dataclass
class ProblemConfig:
    model: dict
    reward: dict
    grids: dict
    mc: Optional[dict] = None
    output: dict = field(default_factory=lambda: {"dir": "out"})

    # ------------------------------------------------------------- builders

    def build_model(self) -> Model:
        m = self.model
        kwargs = {}
        if "interval_l" in m or "interval_r" in m:
            kwargs["interval"] = (m.get("interval_l", 0.0),
                                  m.get("interval_r", math.inf))
        if "anchor" in m:
            kwargs["anchor"] = m["anchor"]
        spec = ModelSpec(kind=Kind(m["kind"]), mu=m["mu"], sigma=m["sigma"],
                         q=m["q"], **kwargs)
        return make_model(spec)

    def build_reward(self) -> RewardSpec:
        r = dict(self.reward)
        name = r.pop("name")
        if name == "power_sum":
            return power_sum_reward(**r)
        if name == "lookback":
            return lookback_reward(**r)
        if name == "put":
            return put_reward(**r)
        if name == "russian":
            return russian_reward(**r)
        raise ConfigError(f"unknown reward name {name!r}")

    def build_mc(self) -> MCConfig:
        if self.mc is None:
            raise ConfigError("config has no [mc] section")
        m = self.mc
        return MCConfig(n_paths=m["n_paths"], dt=m["dt"], t_max=m["t_max"],
                        seed=m["seed"], antithetic=m.get("antithetic", False),
                        continuity_correction=m.get("continuity_correction",
                                                    True))

    @property
    def verify_points(self) -> list:
        if self.mc is None or "points" not in self.mc:
            return []
        return list(self.mc["points"])


# ------------------------------------------------------------------ parsing

def _convert(raw: str):
    low = raw.strip().lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw.strip()


def _parse_points(raw: str) -> tuple:
    pts = []
    for chunk in raw.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(":")
        if len(parts) != 2:
            raise ConfigError(
                f"bad point {chunk!r}: expected x0:s0")
        pts.append((float(parts[0]), float(parts[1])))
    return tuple(pts)


def loads(text: str) -> ProblemConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # preserve key case (K is the strike, k a shape)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from exc

    model = _read_section(parser, "model", _MODEL_KEYS, required=True)
    reward = _read_section(parser, "reward", _REWARD_KEYS, required=True)
    grids = _read_section(parser, "grids", _GRID_KEYS, required=True)
    mc = _read_section(parser, "mc", _MC_KEYS, required=False)
    output = _read_section(parser, "output", _OUTPUT_KEYS, required=False)

    if mc is not None and "points" in mc:
        mc["points"] = _parse_points(str(mc["points"]))

    cfg = ProblemConfig(model=model, reward=reward, grids=grids, mc=mc,
                        output=output or {"dir": "out"})
    validate(cfg)
    return cfg


def _read_section(parser, name, allowed, required):
    if not parser.has_section(name):
        if required:
            raise ConfigError(f"missing required section [{name}]")
        return None
    out = {}
    for key, raw in parser.items(name):
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in section [{name}]")
        out[key] = _convert(raw)
    return out


def load(path: str) -> ProblemConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return loads(text)


def validate(cfg: ProblemConfig) -> None:
    m = cfg.model
    for key in ("kind", "mu", "sigma", "q"):
        if key not in m:
            raise ConfigError(f"[model] missing key {key!r}")
    try:
        Kind(m["kind"])
    except ValueError as exc:
        raise ConfigError(f"[model] unknown kind {m['kind']!r}") from exc
    r = cfg.reward
    if "name" not in r:
        raise ConfigError("[reward] missing key 'name'")
    if r["name"] not in _REWARD_PARAMS:
        raise ConfigError(f"[reward] unknown name {r['name']!r}")
    extra = set(r) - {"name"} - set(_REWARD_PARAMS[r["name"]])
    if extra:
        raise ConfigError(
            f"[reward] keys {sorted(extra)} not accepted by {r['name']!r}")
    g = cfg.grids
    for key in ("s_min", "s_max", "n_s", "n_x"):
        if key not in g:
            raise ConfigError(f"[grids] missing key {key!r}")
    if not g["s_min"] <= g["s_max"]:
        raise ConfigError("[grids] requires s_min <= s_max")
    if g["n_s"] < 1 or g["n_x"] < 2:
        raise ConfigError("[grids] requires n_s >= 1 and n_x >= 2")
    if cfg.mc is not None:
        for key in ("n_paths", "dt", "t_max", "seed"):
            if key not in cfg.mc:
                raise ConfigError(f"[mc] missing key {key!r}")


# ------------------------------------------------------------------ dumping

def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, tuple):  # points
        return ", ".join(f"{format(x, 'g')}:{format(s, 'g')}" for x, s in value)
    return str(value)


def dumps(cfg: ProblemConfig) -> str:
    buf = io.StringIO()
    sections = [("model", cfg.model), ("reward", cfg.reward),
                ("grids", cfg.grids)]
    if cfg.mc is not None:
        sections.append(("mc", cfg.mc))
    sections.append(("output", cfg.output))
    for name, data in sections:
        buf.write(f"[{name}]\n")
        for key in data:
            buf.write(f"{key} = {_fmt(data[key])}\n")
        buf.write("\n")
    return buf.getvalue()
