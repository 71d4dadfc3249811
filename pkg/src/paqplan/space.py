"""Hyperparameter search spaces and the configurations drawn from them.

A space is a flat list of parameters, optionally headed by a categorical
family parameter with per-family branch parameters (nested spaces). Grid
construction, uniform sampling, and bound clipping all operate on each
parameter's declared scale: log10 parameters are gridded, sampled, and
clipped in exponent space.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np
import yaml


class InvalidSpaceError(ValueError):
    pass


class InfeasibleGridError(ValueError):
    pass


@dataclass(frozen=True)
class ParamSpec:
    """One hyperparameter: a bounded continuous range or a categorical set.

    Continuous parameters carry ``bounds=(lo, hi)`` with ``lo < hi`` and a
    scale of ``linear`` or ``log10`` (log10 requires ``lo > 0``).
    Categorical parameters carry a non-empty tuple of unique choices.
    """

    name: str
    kind: str
    bounds: tuple[float, float] | None = None
    scale: str = "linear"
    choices: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if not self.name:
            raise InvalidSpaceError("parameter name must be non-empty")
        if self.kind == "continuous":
            if self.bounds is None:
                raise InvalidSpaceError(f"{self.name}: continuous parameter needs bounds")
            lo, hi = self.bounds
            if not lo < hi:
                raise InvalidSpaceError(f"{self.name}: bounds must satisfy lo < hi")
            if self.scale not in ("linear", "log10"):
                raise InvalidSpaceError(f"{self.name}: unknown scale {self.scale!r}")
            if self.scale == "log10" and lo <= 0:
                raise InvalidSpaceError(f"{self.name}: log10 scale requires lo > 0")
            if self.choices is not None:
                raise InvalidSpaceError(f"{self.name}: continuous parameter cannot have choices")
        elif self.kind == "categorical":
            if not self.choices:
                raise InvalidSpaceError(f"{self.name}: categorical parameter needs choices")
            if len(set(self.choices)) != len(self.choices):
                raise InvalidSpaceError(f"{self.name}: choices must be unique")
            if self.bounds is not None:
                raise InvalidSpaceError(f"{self.name}: categorical parameter cannot have bounds")
        else:
            raise InvalidSpaceError(f"{self.name}: unknown kind {self.kind!r}")

    def to_scale(self, value: float) -> float:
        """Natural value -> position on the declared scale."""
        return math.log10(value) if self.scale == "log10" else float(value)

    def from_scale(self, z: float) -> float:
        """Position on the declared scale -> natural value."""
        return float(10.0 ** z) if self.scale == "log10" else float(z)

    def scale_bounds(self) -> tuple[float, float]:
        lo, hi = self.bounds  # type: ignore[misc]
        return self.to_scale(lo), self.to_scale(hi)


@dataclass(frozen=True)
class SearchSpace:
    """Parameters shared by every family plus optional per-family branches."""

    params: tuple[ParamSpec, ...] = ()
    family_param: ParamSpec | None = None
    branches: Mapping[str, tuple[ParamSpec, ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.family_param is not None and self.family_param.kind != "categorical":
            raise InvalidSpaceError("family parameter must be categorical")
        if self.branches and self.family_param is None:
            raise InvalidSpaceError("branch parameters require a family parameter")
        for choice in self.branches:
            if choice not in (self.family_param.choices or ()):
                raise InvalidSpaceError(f"branch {choice!r} is not a family choice")
        if not self.params and self.family_param is None:
            raise InvalidSpaceError("space must declare at least one parameter")
        for family in self.families():
            names = [p.name for p in self.active_params(family)]
            if len(set(names)) != len(names):
                raise InvalidSpaceError(f"duplicate parameter names in branch {family!r}")

    def families(self) -> tuple[str | None, ...]:
        if self.family_param is None:
            return (None,)
        return tuple(self.family_param.choices or ())

    def active_params(self, family: str | None) -> tuple[ParamSpec, ...]:
        extra: tuple[ParamSpec, ...] = ()
        if family is not None:
            if self.family_param is None or family not in (self.family_param.choices or ()):
                raise InvalidSpaceError(f"unknown family {family!r}")
            extra = tuple(self.branches.get(family, ()))
        return self.params + extra

    def continuous_params(self, family: str | None) -> tuple[ParamSpec, ...]:
        return tuple(p for p in self.active_params(family) if p.kind == "continuous")

    def categorical_params(self, family: str | None) -> tuple[ParamSpec, ...]:
        return tuple(p for p in self.active_params(family) if p.kind == "categorical")

    def validate_config(self, config: "Configuration") -> None:
        """Raise if the configuration does not belong to this space."""
        if self.family_param is None:
            if config.family is not None:
                raise InvalidSpaceError("configuration names a family but the space has none")
        elif config.family not in (self.family_param.choices or ()):
            raise InvalidSpaceError(f"unknown family {config.family!r}")
        active = self.active_params(config.family)
        expected = {p.name for p in active}
        got = set(config.values)
        if expected != got:
            raise InvalidSpaceError(
                f"configuration parameters {sorted(got)} do not match active set {sorted(expected)}")
        for p in active:
            v = config.values[p.name]
            if p.kind == "continuous":
                lo, hi = p.bounds  # type: ignore[misc]
                if not (lo <= float(v) <= hi):
                    raise InvalidSpaceError(f"{p.name}={v} outside bounds [{lo}, {hi}]")
            elif v not in (p.choices or ()):
                raise InvalidSpaceError(f"{p.name}={v!r} is not a declared choice")


@dataclass(frozen=True)
class Configuration:
    """One point in a search space: a family label plus parameter values."""

    family: str | None
    values: Mapping[str, float | str]

    def key(self) -> tuple:
        """Hashable identity used for history lookups and deduplication."""
        return (self.family, tuple(sorted(self.values.items())))

    def describe(self) -> str:
        body = ",".join(f"{k}={v!r}" if isinstance(v, str) else f"{k}={float(v)!r}"
                        for k, v in sorted(self.values.items()))
        return body if self.family is None else f"family={self.family},{body}"


def _continuous_axis(p: ParamSpec, m: int) -> list[float]:
    lo_s, hi_s = p.scale_bounds()
    return [p.from_scale(z) for z in np.linspace(lo_s, hi_s, m)]


def grid_points(space: SearchSpace, budget: int) -> list[Configuration]:
    """Regular grid over the space with at most ``budget`` points.

    Continuous dimensions get m evenly spaced points on their declared scale,
    endpoints included, with m the largest integer the budget allows (the
    D-th root of the per-family-combination budget, floored). Categorical
    dimensions always contribute every choice. Points are enumerated
    row-major over dimensions in declaration order, families first.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")

    plans = []
    for family in space.families():
        cells = 1
        for p in space.categorical_params(family):
            cells *= len(p.choices or ())
        plans.append((family, cells, len(space.continuous_params(family))))

    def total(m: int) -> int:
        return sum(cells * (m ** d) for _, cells, d in plans)

    if total(1) > budget:
        raise InfeasibleGridError(
            f"budget {budget} is below the {total(1)} categorical combinations")

    max_d = max(d for _, _, d in plans)
    if max_d == 0:
        m = 1
    else:
        m = max(1, int((budget / max(1, total(1))) ** (1.0 / max_d)) + 2)
        while total(m) > budget:
            m -= 1

    points: list[Configuration] = []
    for family in space.families():
        axes: list[list] = []
        names: list[str] = []
        for p in space.active_params(family):
            names.append(p.name)
            if p.kind == "continuous":
                axes.append(_continuous_axis(p, m))
            else:
                axes.append(list(p.choices or ()))
        for combo in itertools.product(*axes):
            points.append(Configuration(family=family, values=dict(zip(names, combo))))
    return points


def sample_uniform(space: SearchSpace, rng: np.random.Generator) -> Configuration:
    """Uniform draw: family uniform over choices, continuous values uniform
    on their declared scale, categoricals uniform over choices.

    Draw order is fixed (family, then active parameters in declaration
    order) so equal seeds give equal configuration sequences.
    """
    family: str | None = None
    if space.family_param is not None:
        choices = space.family_param.choices or ()
        family = choices[int(rng.integers(len(choices)))]
    values: dict[str, float | str] = {}
    for p in space.active_params(family):
        if p.kind == "continuous":
            lo_s, hi_s = p.scale_bounds()
            values[p.name] = p.from_scale(float(rng.uniform(lo_s, hi_s)))
        else:
            values[p.name] = (p.choices or ())[int(rng.integers(len(p.choices or ())))]
    return Configuration(family=family, values=values)


def clip(
    space: SearchSpace,
    raw: np.ndarray,
    family: str | None = None,
) -> tuple[Configuration, bool]:
    """Clamp a scale-space vector onto the box of the active continuous
    parameters.

    Returns the in-bounds configuration and whether any coordinate had to be
    clamped. Derivative-free searchers treat a clamped proposal as a failed
    evaluation (error 1.0) rather than training it.
    """
    cont = space.continuous_params(family)
    if space.categorical_params(family):
        raise InvalidSpaceError("clip supports continuous-only family branches")
    raw = np.asarray(raw, dtype=float)
    if raw.shape != (len(cont),):
        raise ValueError(f"expected {len(cont)} coordinates, got shape {raw.shape}")
    penalized = False
    values: dict[str, float | str] = {}
    for p, z in zip(cont, raw):
        lo_s, hi_s = p.scale_bounds()
        if z < lo_s:
            z, penalized = lo_s, True
        elif z > hi_s:
            z, penalized = hi_s, True
        values[p.name] = p.from_scale(float(z))
    return Configuration(family=family, values=values), penalized


def _param_from_dict(entry: Mapping) -> ParamSpec:
    kind = entry.get("kind", "categorical" if "choices" in entry else "continuous")
    if kind == "continuous":
        bounds = entry.get("bounds")
        if bounds is None or len(bounds) != 2:
            raise InvalidSpaceError(f"{entry.get('name')}: bounds must be a [lo, hi] pair")
        return ParamSpec(
            name=str(entry["name"]),
            kind="continuous",
            bounds=(float(bounds[0]), float(bounds[1])),
            scale=str(entry.get("scale", "linear")),
        )
    return ParamSpec(
        name=str(entry["name"]),
        kind="categorical",
        choices=tuple(str(c) for c in entry.get("choices", ())),
    )


def space_from_dict(doc: Mapping) -> SearchSpace:
    family = None
    if "family" in doc and doc["family"] is not None:
        fam = doc["family"]
        family = ParamSpec(
            name=str(fam.get("name", "family")),
            kind="categorical",
            choices=tuple(str(c) for c in fam.get("choices", ())),
        )
    params = tuple(_param_from_dict(e) for e in doc.get("params", ()))
    branches = {
        str(choice): tuple(_param_from_dict(e) for e in entries)
        for choice, entries in (doc.get("branches") or {}).items()
    }
    return SearchSpace(params=params, family_param=family, branches=branches)


def load_space(path: str | Path) -> SearchSpace:
    """Read one space document (YAML; see README for the schema)."""
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, Mapping):
        raise InvalidSpaceError(f"{path}: space file must hold a single mapping document")
    return space_from_dict(doc)


def iter_space_params(space: SearchSpace) -> Iterator[ParamSpec]:
    seen = set()
    for family in space.families():
        for p in space.active_params(family):
            if p.name not in seen:
                seen.add(p.name)
                yield p
