"""Shared data types: expression matrices, responses, category collections,
rejection regions, and the package error hierarchy.

All types are immutable after construction and safe to share across workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np


class CatsafeError(Exception):
    """Base class for all package errors."""


class InputError(CatsafeError):
    """Invalid user input: malformed files, inconsistent shapes, bad options."""


class DegenerateGeneError(CatsafeError):
    """A gene row cannot support the requested local statistic."""

    def __init__(self, message: str, gene_ids: Sequence[str] = ()):
        super().__init__(message)
        self.gene_ids = tuple(gene_ids)


class ConvergenceError(CatsafeError):
    """An iterative fit failed to converge."""


class ResamplingError(CatsafeError):
    """A resampling plan cannot be carried out (e.g. redraw limit exhausted)."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ExpressionMatrix:
    """m x n expression values with row (gene) and column (array) identifiers."""

    gene_ids: tuple[str, ...]
    array_ids: tuple[str, ...]
    values: np.ndarray  # (m, n) float64, read-only

    def __post_init__(self):
        values = _readonly(np.asarray(self.values, dtype=np.float64))
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "gene_ids", tuple(self.gene_ids))
        object.__setattr__(self, "array_ids", tuple(self.array_ids))
        m, n = values.shape if values.ndim == 2 else (0, 0)
        if values.ndim != 2 or m < 2 or n < 2:
            raise InputError(
                f"expression matrix must be at least 2x2, got shape {values.shape}"
            )
        if len(self.gene_ids) != m:
            raise InputError(f"{len(self.gene_ids)} gene ids for {m} rows")
        if len(self.array_ids) != n:
            raise InputError(f"{len(self.array_ids)} array ids for {n} columns")
        for name, ids in (("gene", self.gene_ids), ("array", self.array_ids)):
            dup = _first_duplicate(ids)
            if dup is not None:
                raise InputError(f"duplicate {name} id {dup!r}")
        if not np.all(np.isfinite(values)):
            i, j = np.argwhere(~np.isfinite(values))[0]
            raise InputError(
                f"non-finite expression value at gene {self.gene_ids[i]!r}, "
                f"array {self.array_ids[j]!r}"
            )

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def row_index(self) -> dict[str, int]:
        return {g: i for i, g in enumerate(self.gene_ids)}


def _first_duplicate(items: Iterable[str]) -> str | None:
    seen = set()
    for x in items:
        if x in seen:
            return x
        seen.add(x)
    return None


class ResponseKind(Enum):
    TWO_GROUP = "two-group"
    MULTI_GROUP = "multi-group"
    SURVIVAL = "survival"


@dataclass(frozen=True)
class Response:
    """Per-array outcome: group labels or (time, event) survival pairs."""

    kind: ResponseKind
    labels: np.ndarray | None = None  # int codes, 1-based
    times: np.ndarray | None = None
    events: np.ndarray | None = None

    def __post_init__(self):
        if self.kind in (ResponseKind.TWO_GROUP, ResponseKind.MULTI_GROUP):
            if self.labels is None:
                raise InputError(f"{self.kind.value} response requires labels")
            labels = _readonly(np.asarray(self.labels, dtype=np.int64))
            object.__setattr__(self, "labels", labels)
            if labels.ndim != 1 or labels.size < 2:
                raise InputError("labels must be a vector of length >= 2")
            if self.kind is ResponseKind.TWO_GROUP:
                present = set(np.unique(labels).tolist())
                if not present <= {1, 2}:
                    bad = sorted(present - {1, 2})[0]
                    raise InputError(f"two-group labels must be 1 or 2, got {bad}")
                if present != {1, 2}:
                    raise InputError("two-group response needs at least one array per group")
            else:
                uniq = np.unique(labels)
                k = uniq.size
                if k < 2:
                    raise InputError("multi-group response needs at least 2 groups")
                if uniq[0] < 1 or uniq[-1] > k or not np.array_equal(uniq, np.arange(1, k + 1)):
                    raise InputError("multi-group labels must cover 1..k")
        elif self.kind is ResponseKind.SURVIVAL:
            if self.times is None or self.events is None:
                raise InputError("survival response requires times and events")
            times = _readonly(np.asarray(self.times, dtype=np.float64))
            events = _readonly(np.asarray(self.events, dtype=np.int64))
            object.__setattr__(self, "times", times)
            object.__setattr__(self, "events", events)
            if times.shape != events.shape or times.ndim != 1 or times.size < 2:
                raise InputError("times and events must be equal-length vectors, length >= 2")
            if np.any(times <= 0) or not np.all(np.isfinite(times)):
                raise InputError("survival times must be positive and finite")
            if not np.all((events == 0) | (events == 1)):
                raise InputError("event indicators must be 0 or 1")
            if events.sum() < 1:
                raise InputError("survival response needs at least one event")
        else:  # pragma: no cover
            raise InputError(f"unknown response kind {self.kind!r}")

    @property
    def n(self) -> int:
        return int(self.labels.size if self.labels is not None else self.times.size)

    def group_sizes(self) -> dict[int, int]:
        if self.labels is None:
            raise InputError("group sizes undefined for survival responses")
        uniq, counts = np.unique(self.labels, return_counts=True)
        return dict(zip(uniq.tolist(), counts.tolist()))

    @staticmethod
    def two_group(labels) -> "Response":
        return Response(ResponseKind.TWO_GROUP, labels=np.asarray(labels))

    @staticmethod
    def multi_group(labels) -> "Response":
        return Response(ResponseKind.MULTI_GROUP, labels=np.asarray(labels))

    @staticmethod
    def survival(times, events) -> "Response":
        return Response(ResponseKind.SURVIVAL, times=np.asarray(times), events=np.asarray(events))

    def reordered(self, order: np.ndarray) -> "Response":
        if self.labels is not None:
            return Response(self.kind, labels=self.labels[order])
        return Response(self.kind, times=self.times[order], events=self.events[order])


@dataclass(frozen=True)
class CategoryEntry:
    name: str
    description: str
    member_indices: np.ndarray  # sorted unique int row indices

    def __post_init__(self):
        idx = np.unique(np.asarray(self.member_indices, dtype=np.intp))
        object.__setattr__(self, "member_indices", _readonly(idx))

    @property
    def size(self) -> int:
        return int(self.member_indices.size)


@dataclass(frozen=True)
class CategoryCollection:
    """Named gene sets resolved to row indices of one expression matrix."""

    entries: tuple[CategoryEntry, ...]
    m: int  # number of genes in the backing matrix

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        names = [e.name for e in self.entries]
        dup = _first_duplicate(names)
        if dup is not None:
            raise InputError(f"duplicate category name {dup!r}")
        for e in self.entries:
            if e.size == 0:
                raise InputError(f"category {e.name!r} is empty")
            if e.member_indices[0] < 0 or e.member_indices[-1] >= self.m:
                raise InputError(f"category {e.name!r} has out-of-range gene indices")
            if e.size >= self.m:
                raise InputError(f"category {e.name!r} leaves an empty complement")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    def overlapping(self) -> bool:
        seen = np.zeros(self.m, dtype=bool)
        for e in self.entries:
            if seen[e.member_indices].any():
                return True
            seen[e.member_indices] = True
        return False


# --- rejection regions for categorical global statistics ---


@dataclass(frozen=True)
class UpperTail:
    """Reject local statistics strictly exceeding the threshold."""

    threshold: float

    def __post_init__(self):
        if not np.isfinite(self.threshold):
            raise InputError("rejection threshold must be finite")


@dataclass(frozen=True)
class TwoSided:
    """Reject local statistics whose absolute value exceeds the threshold."""

    threshold: float

    def __post_init__(self):
        if not np.isfinite(self.threshold) or self.threshold < 0:
            raise InputError("two-sided rejection threshold must be finite and >= 0")


@dataclass(frozen=True)
class TopR:
    """Reject the `count` largest local statistics (data-dependent region).

    Data-dependent regions break the independence the categorical tests
    assume; results carry a warning flag.
    """

    count: int

    def __post_init__(self):
        if self.count < 1:
            raise InputError("TopR count must be >= 1")


RejectionRegion = UpperTail | TwoSided | TopR


def rejected_mask(t: np.ndarray, region: RejectionRegion, m: int | None = None) -> np.ndarray:
    """Boolean mask of rejected local statistics under the region."""
    t = np.asarray(t, dtype=np.float64)
    if isinstance(region, UpperTail):
        return t > region.threshold
    if isinstance(region, TwoSided):
        return np.abs(t) > region.threshold
    if isinstance(region, TopR):
        m = t.size if m is None else m
        if not 1 <= region.count <= m - 1:
            raise InputError(f"TopR count must lie in [1, {m - 1}], got {region.count}")
        # stable selection: ties at the cutoff broken by gene order
        order = np.argsort(-t, kind="stable")
        mask = np.zeros(t.size, dtype=bool)
        mask[order[: region.count]] = True
        return mask
    raise InputError(f"unknown rejection region {region!r}")
