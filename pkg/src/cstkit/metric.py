"""Mixed-type tuple distance used to build situation-testing neighborhoods.

Per attribute, categorical values contribute a mismatch indicator and
numeric values (continuous, ordinal, interval) a range-normalised absolute
difference. The tuple distance is the mean over the relevant attributes;
protected attributes and the decision never enter it.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
import pandas as pd

KINDS = ("continuous", "ordinal", "interval", "categorical")
ROLES = ("relevant", "protected", "decision", "ignore")


@dataclass(frozen=True)
class Attribute:
    name: str
    kind: str = "continuous"
    role: str = "relevant"
    # protected attributes: value marking protected status; decision: positive outcome
    value: object = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"attribute {self.name!r}: unknown kind {self.kind!r}")
        if self.role not in ROLES:
            raise ValueError(f"attribute {self.name!r}: unknown role {self.role!r}")


@dataclass(frozen=True)
class AttributeSchema:
    """Column kinds and roles for a decision dataset."""

    attributes: tuple[Attribute, ...]

    def __post_init__(self):
        object.__setattr__(self, "attributes", tuple(self.attributes))
        decisions = [a for a in self.attributes if a.role == "decision"]
        if len(decisions) != 1:
            raise ValueError("schema needs exactly one decision attribute")

    def __getitem__(self, name: str) -> Attribute:
        for a in self.attributes:
            if a.name == name:
                return a
        raise KeyError(name)

    @property
    def relevant(self) -> list[Attribute]:
        return [a for a in self.attributes if a.role == "relevant"]

    @property
    def protected(self) -> dict[str, object]:
        return {a.name: (1 if a.value is None else a.value)
                for a in self.attributes if a.role == "protected"}

    @property
    def decision(self) -> str:
        return next(a.name for a in self.attributes if a.role == "decision")

    @property
    def positive(self) -> object:
        d = self[self.decision]
        return 1 if d.value is None else d.value

    def to_dict(self) -> dict:
        out = []
        for a in self.attributes:
            item = {"name": a.name, "kind": a.kind, "role": a.role}
            if a.value is not None:
                item["value"] = a.value
            out.append(item)
        return {"attributes": out}

    @classmethod
    def from_dict(cls, spec: Mapping) -> "AttributeSchema":
        return cls(tuple(Attribute(**dict(a)) for a in spec["attributes"]))

    @classmethod
    def simple(cls, relevant: Iterable[str], protected: Mapping[str, object],
               decision: str = "Y", positive: object = 1,
               kinds: Mapping[str, str] | None = None) -> "AttributeSchema":
        kinds = kinds or {}
        attrs = [Attribute(n, kinds.get(n, "continuous"), "relevant") for n in relevant]
        attrs += [Attribute(n, "categorical", "protected", v) for n, v in protected.items()]
        attrs.append(Attribute(decision, "categorical", "decision", positive))
        return cls(tuple(attrs))


@dataclass(frozen=True)
class RangeTable:
    bounds: Mapping[str, tuple[float, float]]
    degenerate: frozenset[str] = field(default_factory=frozenset)


def attribute_ranges(data: pd.DataFrame, schema: AttributeSchema) -> RangeTable:
    """Observed (min, max) per non-categorical relevant attribute of ``data``."""
    if len(data) == 0:
        raise ValueError("cannot compute ranges of an empty dataset")
    bounds, degenerate = {}, set()
    for a in schema.relevant:
        if a.kind == "categorical":
            continue
        col = data[a.name].to_numpy(dtype=float)
        lo, hi = float(np.min(col)), float(np.max(col))
        bounds[a.name] = (lo, hi)
        if hi == lo:
            degenerate.add(a.name)
    return RangeTable(bounds, frozenset(degenerate))


def per_attribute_distance(kind: str, v, w, bounds: tuple[float, float] | None = None) -> float:
    if kind == "categorical":
        return 0.0 if v == w else 1.0
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}")
    diff = abs(float(v) - float(w))
    if bounds is None:
        return diff
    span = bounds[1] - bounds[0]
    if span == 0:
        if diff == 0:
            return 0.0
        raise ValueError("degenerate range with distinct values")
    return diff / span


def tuple_distance(x: Mapping, y: Mapping, schema: AttributeSchema,
                   ranges: RangeTable | None = None) -> float:
    """Distance between two records (mappings or Series) over relevant attributes."""
    attrs = schema.relevant
    if not attrs:
        raise ValueError("schema has no relevant attributes")
    total = 0.0
    for a in attrs:
        if a.kind != "categorical" and ranges is not None and a.name in ranges.degenerate:
            continue
        bounds = None if ranges is None or a.kind == "categorical" else ranges.bounds[a.name]
        total += per_attribute_distance(a.kind, x[a.name], y[a.name], bounds)
    return total / len(attrs)


class DistanceContext:
    """Vectorised distance from one center to many records.

    Ranges come from the factual dataset and are reused for counterfactual
    centers, which can therefore sit at distance > 1. Constant attributes
    carry no weight.
    """

    def __init__(self, schema: AttributeSchema, data: pd.DataFrame,
                 normalize: bool = True):
        self.schema = schema
        self.normalize = normalize
        attrs = schema.relevant
        if not attrs:
            raise ValueError("schema has no relevant attributes")
        self.numeric = [a.name for a in attrs if a.kind != "categorical"]
        self.categorical = [a.name for a in attrs if a.kind == "categorical"]
        self.width = len(attrs)
        self.ranges = attribute_ranges(data, schema)
        if self.ranges.degenerate:
            warnings.warn(f"constant attribute(s) {sorted(self.ranges.degenerate)} "
                          "contribute nothing to distances", stacklevel=2)
        # per relevant attribute, in schema order: (is_numeric, column, divisor or None)
        self._terms = []
        for a in attrs:
            if a.kind == "categorical":
                self._terms.append((False, self.categorical.index(a.name), None))
            elif a.name not in self.ranges.degenerate:
                lo, hi = self.ranges.bounds[a.name]
                self._terms.append((True, self.numeric.index(a.name),
                                    hi - lo if normalize else None))

    def encode(self, data: pd.DataFrame) -> tuple[np.ndarray, np.ndarray]:
        num = data[self.numeric].to_numpy(dtype=float) if self.numeric else \
            np.empty((len(data), 0))
        cat = data[self.categorical].to_numpy(dtype=object) if self.categorical else \
            np.empty((len(data), 0), dtype=object)
        return num, cat

    def distances(self, center_num: np.ndarray, center_cat: np.ndarray,
                  num: np.ndarray, cat: np.ndarray) -> np.ndarray:
        # same operations in the same order as tuple_distance, so results agree bitwise
        # and exact ties stay ties
        total = np.zeros(len(num))
        for numeric, j, span in self._terms:
            if numeric:
                diff = np.abs(num[:, j] - center_num[j])
                total = total + (diff if span is None else diff / span)
            else:
                total = total + (cat[:, j] != center_cat[j])
        return total / self.width
