"""Search spaces and k-nearest-neighbor groups for (counterfactual) situation testing."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping

import numpy as np
import pandas as pd

from .metric import DistanceContext


class ShortGroupWarning(UserWarning):
    """A search space had fewer than ``k`` candidates."""


@dataclass(frozen=True)
class SearchSpaces:
    """Row positions (not index labels) of the control and test search spaces."""

    control: np.ndarray
    test: np.ndarray


@dataclass(frozen=True)
class NeighborSet:
    indices: np.ndarray  # row positions, ascending by distance
    distances: np.ndarray
    short: bool = False

    def __len__(self) -> int:
        return len(self.indices)


def protected_mask(data: pd.DataFrame, protected: Mapping[str, object]) -> np.ndarray:
    if not protected:
        raise ValueError("protected spec is empty")
    mask = np.ones(len(data), dtype=bool)
    for name, value in protected.items():
        if name not in data.columns:
            raise KeyError(f"protected attribute {name!r} not in dataset")
        mask &= (data[name] == value).to_numpy()
    return mask


def partition_search_spaces(data: pd.DataFrame, protected: Mapping[str, object]) -> SearchSpaces:
    """Control space: records matching every protected value; test space: the rest."""
    mask = protected_mask(data, protected)
    control, test = np.flatnonzero(mask), np.flatnonzero(~mask)
    if len(control) == 0:
        raise ValueError(f"no records match the protected spec {dict(protected)}")
    if len(test) == 0:
        raise ValueError("test search space is empty")
    return SearchSpaces(control, test)


def rank_space(center: tuple[np.ndarray, np.ndarray], space: np.ndarray,
               features: tuple[np.ndarray, np.ndarray], ctx: DistanceContext,
               exclude: int | None = None, limit: int | None = None
               ) -> tuple[np.ndarray, np.ndarray]:
    """``space`` (ascending row positions) sorted by distance to ``center``,
    ties broken by row position. With ``limit``, only the first ``limit``."""
    num, cat = features
    if exclude is not None:
        space = space[space != exclude]
    d = ctx.distances(center[0], center[1], num[space], cat[space])
    if limit is not None and limit < len(d):
        # keep every candidate tied with the limit-th distance so tie-breaking stays exact
        cutoff = np.partition(d, limit - 1)[limit - 1]
        keep = np.flatnonzero(d <= cutoff)
        order = keep[np.argsort(d[keep], kind="stable")][:limit]
    else:
        order = np.argsort(d, kind="stable")
    return space[order], d[order]


def top_k(ranked: tuple[np.ndarray, np.ndarray], k: int,
          max_distance: float | None = None) -> NeighborSet:
    idx, dist = ranked
    idx, dist = idx[:k], dist[:k]
    if max_distance is not None:
        keep = dist <= max_distance
        idx, dist = idx[keep], dist[keep]
    return NeighborSet(idx, dist, short=len(idx) < k)


def get_top_k(center: pd.Series | Mapping, data: pd.DataFrame, space: np.ndarray, k: int,
              ctx: DistanceContext, exclude: int | None = None,
              max_distance: float | None = None) -> NeighborSet:
    """The ``k`` records of ``space`` closest to ``center``.

    ``exclude`` drops one row position (the complainant itself when searching
    its own space). Fewer than ``k`` neighbours come back, with ``short``
    set, when the space is too small.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(space) == 0:
        raise ValueError("search space is empty")
    space = np.sort(np.asarray(space))
    center_frame = pd.DataFrame([dict(center)])
    cnum, ccat = ctx.encode(center_frame)
    ranked = rank_space((cnum[0], ccat[0]), space, ctx.encode(data), ctx, exclude)
    out = top_k(ranked, k, max_distance)
    if out.short:
        warnings.warn(f"only {len(out)} neighbours available for k={k}",
                      ShortGroupWarning, stacklevel=2)
    return out


def build_groups(c: int, data: pd.DataFrame, cf_data: pd.DataFrame, spaces: SearchSpaces,
                 k: int, ctx: DistanceContext,
                 max_distance: float | None = None) -> tuple[NeighborSet, NeighborSet]:
    """Control group around the factual record ``c`` (itself excluded) and test
    group around its counterfactual. ``c`` is a row position."""
    if c not in set(spaces.control.tolist()):
        raise ValueError(f"record {c} is not in the control search space")
    ctr = get_top_k(data.iloc[c], data, spaces.control, k, ctx, exclude=c,
                    max_distance=max_distance)
    tst = get_top_k(cf_data.iloc[c], data, spaces.test, k, ctx, max_distance=max_distance)
    return ctr, tst
