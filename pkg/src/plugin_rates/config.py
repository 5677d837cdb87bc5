"""
Flat ``key = value`` run configuration.

Lines are ``key = value``; ``#`` starts a comment line. Every key belongs to
a namespace (``oracle.``, ``lp.``, ``sieve.``, ``sweep.``, ``fit.``,
``out.``) or is the top-level ``seed``. Keys are declared in ``SCHEMA``
with a parser and a range check; anything else is rejected.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Callable

from .errors import ConfigError

U64_MAX = (1 << 64) - 1


def _float(text: str) -> float:
    v = float(text)
    if math.isnan(v):
        raise ValueError("nan")
    return v


def _int(text: str) -> int:
    return int(text)


def _bool(text: str) -> bool:
    t = text.lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(text)


def _ints(text: str) -> tuple:
    return tuple(int(t) for t in text.replace(" ", "").split(",") if t)


def _floats(text: str) -> tuple:
    return tuple(_float(t) for t in text.replace(" ", "").split(",") if t)


def _points(text: str) -> tuple:
    """``0.1 0.2; 0.3 0.4`` -> ((0.1, 0.2), (0.3, 0.4))."""
    return tuple(tuple(_float(v) for v in p.split()) for p in text.split(";") if p.strip())


def _choice(*options):
    def parse(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text
    return parse


def _pos(v):
    return v > 0


def _nonneg(v):
    return v >= 0


def _at_least(k):
    return lambda v: v >= k


def _increasing(v):
    return len(v) > 0 and v[0] >= 1 and all(b > a for a, b in zip(v, v[1:]))


def _all_pos(v):
    return len(v) > 0 and all(x > 0 for x in v)


def _unit_open(v):
    return 0 < v < 0.5


def _signs(v):
    return all(s in (-1, 1) for s in v)


def _norm_index(v):
    return v >= 1


@dataclass(frozen=True)
class Key:
    parse: Callable
    check: Callable = lambda v: True
    requirement: str = ""
    default: object = None


_ANY = lambda v: True  # noqa: E731

SCHEMA: dict[str, Key] = {
    "seed": Key(_int, lambda v: 0 <= v <= U64_MAX, "an integer in [0, 2^64)", 0),
    "oracle.kind": Key(_choice("parabola", "corridor", "hypercube", "hypercube_family")),
    "oracle.d": Key(_int, _at_least(1), ">= 1", 1),
    "oracle.n": Key(_int, _at_least(1), ">= 1"),
    "oracle.c_coef": Key(_float, _pos, "> 0"),
    "oracle.radius": Key(_float, _pos, "> 0", 1.0),
    "oracle.t0": Key(_float, _unit_open, "in (0, 1/2)"),
    "oracle.gap_width": Key(_float, _pos, "> 0"),
    "oracle.q": Key(_int, _at_least(1), ">= 1"),
    "oracle.m": Key(_int, _at_least(1), ">= 1"),
    "oracle.w": Key(_float, _pos, "> 0"),
    "oracle.beta": Key(_float, _pos, "> 0"),
    "oracle.lip": Key(_float, _pos, "> 0"),
    "oracle.c_phi": Key(_float, lambda v: 0 < v <= 1, "in (0, 1]"),
    "oracle.sigma": Key(_ints, _signs, "a comma list of -1/1"),
    "oracle.mode": Key(_choice("strong", "mild"), default="strong"),
    "oracle.alpha": Key(_float, _nonneg, ">= 0", 0.0),
    "oracle.c_q": Key(_float, _pos, "> 0", 1.0),
    "oracle.c_w": Key(_float, _pos, "> 0", 1.0),
    "oracle.c_m": Key(_float, _pos, "> 0", 1.0),
    "lp.beta": Key(_float, lambda v: 0 < v < math.inf, "> 0 and finite"),
    "lp.c_h": Key(_float, _pos, "> 0", 1.0),
    "lp.bandwidth": Key(_float, _pos, "> 0"),
    "lp.kernel": Key(_choice("gaussian", "uniform"), default="gaussian"),
    "lp.kernel_radius": Key(_float, _pos, "> 0", 1.0),
    "sieve.beta": Key(_float, lambda v: 0 < v < math.inf, "> 0 and finite"),
    "sieve.lip": Key(_float, _pos, "> 0"),
    "sieve.alpha": Key(_float, _nonneg, ">= 0", 0.0),
    "sieve.rho": Key(_float, _pos, "> 0"),
    "sieve.p": Key(_float, _norm_index, ">= 1 (inf allowed)", math.inf),
    "sieve.c_eps": Key(_float, _pos, "> 0", 1.0),
    "sieve.epsilon": Key(_float, _pos, "> 0"),
    "sieve.n": Key(_int, _at_least(1), ">= 1"),
    "sieve.cells": Key(_int, _at_least(1), ">= 1"),
    "sieve.tau": Key(_float, _pos, "> 0"),
    "sieve.degree": Key(_int, _nonneg, ">= 0"),
    "sieve.d": Key(_int, _at_least(1), ">= 1", 1),
    "sieve.coef_bound": Key(_float, _nonneg, ">= 0", 1.0),
    "sieve.lower": Key(_float, _ANY, "", 0.0),
    "sieve.upper": Key(_float, _ANY, "", 1.0),
    "sieve.budget": Key(_int, _at_least(1), ">= 1", 10 ** 6),
    "sweep.classifier": Key(_choice("lp", "sieve", "bayes", "constant"), default="lp"),
    "sweep.constant": Key(_int, lambda v: v in (0, 1), "0 or 1", 0),
    "sweep.n_grid": Key(_ints, _increasing, "a strictly increasing list of positive integers"),
    "sweep.replicates": Key(_int, _at_least(1), ">= 1", 1),
    "sweep.mc": Key(_int, _at_least(1), ">= 1", 4000),
    "sweep.workers": Key(_int, _at_least(1), ">= 1", 1),
    "sweep.theory": Key(_choice("none", "strong", "mild", "sieve_inf", "sieve_p"), default="none"),
    "sweep.alpha": Key(_float, _nonneg, ">= 0"),
    "sweep.beta": Key(_float, _pos, "> 0"),
    "sweep.d": Key(_int, _at_least(1), ">= 1"),
    "sweep.rho": Key(_float, _pos, "> 0"),
    "sweep.p": Key(_float, _norm_index, ">= 1"),
    "sweep.probe": Key(_choice("concentration", "exponential", "assouad")),
    "sweep.points": Key(_points, lambda v: len(v) > 0, "a ';'-separated list of points"),
    "sweep.deltas": Key(_floats, _all_pos, "a list of positive numbers"),
    "sweep.n": Key(_int, _at_least(1), ">= 1"),
    "sweep.bound_form": Key(_choice("scaled", "printed"), default="scaled"),
    "fit.classifier": Key(_choice("lp", "sieve"), default="lp"),
    "fit.grid_lower": Key(_float, _ANY, "", 0.0),
    "fit.grid_upper": Key(_float, _ANY, "", 1.0),
    "fit.grid_points": Key(_int, _at_least(1), ">= 1", 11),
    "out.name": Key(str, lambda v: bool(v) and "/" not in v, "a nonempty file stem", "run"),
    "out.gnuplot": Key(_bool, default=False),
}


def _parse_value(key: str, text: str):
    if key not in SCHEMA:
        raise ConfigError(f"unknown key {key!r}")
    spec = SCHEMA[key]
    try:
        value = spec.parse(text)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{key}: cannot parse {text!r} ({exc})") from None
    if not spec.check(value):
        raise ConfigError(f"{key}: {text!r} out of range, need {spec.requirement}")
    return value


@dataclass(frozen=True)
class RunConfig:
    raw: dict
    values: dict

    @classmethod
    def from_sources(cls, text: str = "", overrides=(), seed: str | None = None) -> "RunConfig":
        raw: dict[str, str] = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"config line {lineno}: expected key = value")
            k, v = stripped.split("=", 1)
            raw[k.strip()] = v.strip()
        for item in overrides:
            if "=" not in item:
                raise ConfigError(f"--set {item!r}: expected key=value")
            k, v = item.split("=", 1)
            raw[k.strip()] = v.strip()
        if seed is not None:
            raw["seed"] = seed
        values = {k: _parse_value(k, v) for k, v in raw.items()}
        return cls(raw, values)

    def get(self, key: str, default=None):
        if key in self.values:
            return self.values[key]
        d = SCHEMA[key].default
        return d if d is not None else default

    def require(self, key: str):
        if key in self.values:
            return self.values[key]
        if SCHEMA[key].default is not None:
            return SCHEMA[key].default
        raise ConfigError(f"missing required key {key!r}")

    def has(self, key: str) -> bool:
        return key in self.values

    def canonical(self) -> str:
        return "".join(f"{k} = {self.raw[k]}\n" for k in sorted(self.raw))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()[:16]
