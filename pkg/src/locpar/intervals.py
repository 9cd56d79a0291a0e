"""Geometric ladders of right-anchored candidate intervals.

Estimation at a time point ``t`` considers a nested family of windows
``I_1 c I_2 c ... c I_K`` that all end at ``t`` and grow geometrically:

    N_k = max(N_{k-1} + 1, floor(n0 * u**(k-1)))

with base length ``n0`` and ratio ``u`` in (1, 3].  The strict-increase
fallback keeps the ladder usable for ratios close to 1.

The change-point procedure additionally needs, for each step ``k``, the
set of admissible split points inside the freshly added stretch
``I_{k+1} \\ I_k``; a split at ``tau`` divides the testing interval
``I_{k+1}`` into a left part ``[start, tau]`` and a right part
``[tau+1, t]`` whose length is at least ``N_k``.

All time indices are 1-based and inclusive; :meth:`Interval.slice` maps an
interval onto the corresponding 0-based numpy slice.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import (
    BadRatioError,
    GridTooLongError,
    IndexOutOfRangeError,
    InvalidArgumentError,
)


@dataclass(frozen=True)
class Interval:
    """Closed index range [start, end], 1-based."""

    start: int
    end: int

    def __post_init__(self):
        if self.start > self.end:
            raise InvalidArgumentError("interval start exceeds end")

    @property
    def length(self) -> int:
        return self.end - self.start + 1

    @property
    def slice(self) -> slice:
        """0-based numpy slice selecting this interval from a series."""
        return slice(self.start - 1, self.end)


def ladder_lengths(n0: int, u: float, k_max: int) -> list[int]:
    """Candidate window lengths N_1..N_K for the geometric recurrence."""
    if n0 < 2:
        raise InvalidArgumentError("base length n0 must be >= 2")
    if not 1.0 < u <= 3.0:
        raise BadRatioError(f"grid ratio must lie in (1, 3], got {u}")
    if k_max < 1:
        raise InvalidArgumentError("number of scales must be >= 1")
    lengths = [n0]
    for k in range(2, k_max + 1):
        lengths.append(max(lengths[-1] + 1, math.floor(n0 * u ** (k - 1))))
    return lengths


def max_scales(t: int, n0: int = 10, u: float = 1.25) -> int:
    """Largest K whose ladder still fits into a history of length ``t``."""
    if t < n0:
        raise GridTooLongError(f"history {t} shorter than base window {n0}")
    k = 1
    length = n0
    while True:
        nxt = max(length + 1, math.floor(n0 * u**k))
        if nxt > t:
            return k
        length = nxt
        k += 1


@dataclass(frozen=True)
class IntervalGrid:
    """Ladder of nested right-anchored intervals ending at ``right_edge``."""

    right_edge: int
    lengths: tuple[int, ...]
    ratio: float
    n0: int = field(default=0)

    def __post_init__(self):
        if self.n0 == 0:
            object.__setattr__(self, "n0", self.lengths[0])
        if self.lengths[-1] > self.right_edge:
            raise GridTooLongError(
                f"largest window {self.lengths[-1]} exceeds history "
                f"{self.right_edge}"
            )

    @property
    def k_max(self) -> int:
        return len(self.lengths)

    def interval(self, k: int) -> Interval:
        """The k-th candidate window [t - N_k + 1, t]."""
        if not 1 <= k <= self.k_max:
            raise IndexOutOfRangeError(f"step {k} outside 1..{self.k_max}")
        n_k = self.lengths[k - 1]
        return Interval(self.right_edge - n_k + 1, self.right_edge)

    def tested_set(self, k: int) -> range:
        """Split points for step k: the indices of I_{k+1} \\ I_k."""
        if not 1 <= k <= self.k_max - 1:
            raise IndexOutOfRangeError(
                f"tested set defined for 1..{self.k_max - 1}, got {k}"
            )
        lo = self.right_edge - self.lengths[k] + 1
        hi = self.right_edge - self.lengths[k - 1] + 1
        return range(lo, hi)

    def at(self, t: int) -> "IntervalGrid":
        """The same ladder re-anchored at right edge ``t``."""
        return IntervalGrid(t, self.lengths, self.ratio, self.n0)


def build_grid(
    t: int,
    n0: int = 10,
    u: float = 1.25,
    k_max: int | None = None,
) -> IntervalGrid:
    """Construct the ladder at right edge ``t``.

    With ``k_max=None`` the number of scales is chosen maximal for the
    available history.
    """
    if k_max is None:
        k_max = max_scales(t, n0, u)
    lengths = ladder_lengths(n0, u, k_max)
    if lengths[-1] > t:
        raise GridTooLongError(
            f"window ladder reaches {lengths[-1]} but only {t} points exist"
        )
    return IntervalGrid(t, tuple(lengths), u, n0)
