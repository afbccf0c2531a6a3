"""Domain value types shared by the whole package.

All objects here are immutable after construction. Indices exposed to users
are 1-based; arrays are 0-based internally.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import EmptySeries, NonFiniteValue, UsageError

__all__ = [
    "Series",
    "QuantileLevel",
    "ExpertKey",
    "ExpertGrid",
    "EtaSchedule",
    "TruncationPolicy",
    "validate_series",
    "uniform_grid",
    "fractional_grid",
    "as_series_array",
    "check_tau",
]


@dataclass(frozen=True, eq=False)
class Series:
    """Finite, nonempty sequence of real observations ``y_1 .. y_n``."""

    values: np.ndarray

    def __len__(self):
        return self.values.shape[0]

    def __iter__(self):
        return iter(self.values.tolist())

    def __eq__(self, other):
        if not isinstance(other, Series):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    def at(self, t: int) -> float:
        """Observation ``y_t`` using 1-based ``t``."""
        if not 1 <= t <= len(self):
            raise IndexError(f"index {t} outside 1..{len(self)}")
        return float(self.values[t - 1])

    def prefix(self, m: int) -> "Series":
        """``y_1 .. y_m`` (m >= 1)."""
        return Series(self.values[:m])


def validate_series(raw) -> Series:
    """Check that ``raw`` is a nonempty list of finite reals and wrap it.

    Raises
    ------
    EmptySeries
        If ``raw`` has no elements.
    NonFiniteValue
        On the first NaN or infinite entry; the reported index is 1-based.
    """
    if isinstance(raw, Series):
        return raw
    arr = np.array(raw, dtype=np.float64).ravel()
    if arr.size == 0:
        raise EmptySeries()
    bad = np.flatnonzero(~np.isfinite(arr))
    if bad.size:
        raise NonFiniteValue(int(bad[0]) + 1)
    arr.setflags(write=False)
    return Series(arr)


def as_series_array(y, allow_empty: bool = False) -> np.ndarray:
    """Return ``y`` as a validated 1-d float array."""
    if isinstance(y, Series):
        return y.values
    if allow_empty and len(y) == 0:
        return np.empty(0, dtype=np.float64)
    return validate_series(y).values


@dataclass(frozen=True)
class QuantileLevel:
    """A level ``tau`` in the open interval (0, 1).

    ``exact`` keeps the decimal the caller wrote (``"0.1"`` or ``0.1`` both
    give ``Fraction(1, 10)``) so integer tests on ``m * tau`` are exact.
    """

    value: float
    exact: Fraction

    @classmethod
    def of(cls, tau: Union[float, str, Fraction, "QuantileLevel"]) -> "QuantileLevel":
        if isinstance(tau, QuantileLevel):
            return tau
        try:
            if isinstance(tau, Fraction):
                exact = tau
            elif isinstance(tau, str):
                exact = Fraction(tau.strip())
            else:
                f = float(tau)
                if not math.isfinite(f):
                    raise ValueError
                # repr() gives the shortest decimal that round-trips
                exact = Fraction(repr(f))
        except (ValueError, ZeroDivisionError, TypeError):
            raise UsageError(f"invalid quantile level {tau!r}") from None
        if not 0 < exact < 1:
            raise UsageError(f"quantile level must lie in (0, 1), got {tau!r}")
        return cls(float(exact), exact)

    def __float__(self):
        return self.value

    def rank(self, m: int) -> int:
        """1-based order statistic minimising the pinball risk of ``m`` points.

        ``ceil(m*tau)`` when ``m*tau`` is fractional, ``m*tau`` otherwise;
        both cases equal the exact ceiling.
        """
        return max(1, math.ceil(m * self.exact))


def check_tau(tau) -> QuantileLevel:
    return QuantileLevel.of(tau)


@dataclass(frozen=True, order=True)
class ExpertKey:
    """Index of an elementary expert: window length ``k`` and neighbour count ``lbar``.

    In fractional mode ``lbar`` is the 1-based position in the grid's
    ``fractions`` list rather than a neighbour count.
    """

    k: int
    lbar: int

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise UsageError(f"window length must be a positive integer, got {self.k!r}")
        if int(self.lbar) != self.lbar or self.lbar < 1:
            raise UsageError(f"neighbour index must be a positive integer, got {self.lbar!r}")


@dataclass(frozen=True, eq=False)
class ExpertGrid:
    """Finite set of experts with a prior probability for each.

    Parameters
    ----------
    keys
        Distinct expert keys, in the fixed order used for every reduction.
    prior
        Positive weights aligned with ``keys``; renormalised unless they
        already sum to one within 1e-12.
    fractions
        ``None`` for fixed-count mode. Otherwise the list ``p_l`` in (0, 1)
        and the neighbour count at step ``n`` is ``floor(p_l * n)``.
    """

    keys: Tuple[ExpertKey, ...]
    prior: np.ndarray
    fractions: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        keys = tuple(self.keys)
        if not keys:
            raise UsageError("expert grid must contain at least one key")
        if len(set(keys)) != len(keys):
            raise UsageError("expert keys must be distinct")
        prior = np.array(self.prior, dtype=np.float64).ravel()
        if prior.shape[0] != len(keys):
            raise UsageError("prior must have one entry per key")
        if not np.all(np.isfinite(prior)) or np.any(prior <= 0):
            raise UsageError("prior entries must be positive and finite")
        if abs(prior.sum() - 1.0) > 1e-12:
            prior = prior / prior.sum()
        prior.setflags(write=False)
        fractions = None
        if self.fractions is not None:
            fractions = tuple(float(p) for p in self.fractions)
            if any(not 0 < p < 1 for p in fractions):
                raise UsageError("neighbour fractions must lie in (0, 1)")
            if any(key.lbar > len(fractions) for key in keys):
                raise UsageError("fractional-mode key refers to a missing fraction")
        object.__setattr__(self, "keys", keys)
        object.__setattr__(self, "prior", prior)
        object.__setattr__(self, "fractions", fractions)

    def __len__(self):
        return len(self.keys)

    @property
    def fractional(self) -> bool:
        return self.fractions is not None

    def neighbor_counts(self, n: int) -> np.ndarray:
        """Effective neighbour count of every key at step ``n``."""
        if self.fractions is None:
            return np.array([key.lbar for key in self.keys], dtype=np.int64)
        return np.array(
            [math.floor(self.fractions[key.lbar - 1] * n) for key in self.keys],
            dtype=np.int64,
        )


def uniform_grid(k_max: int, lbar_max: int) -> ExpertGrid:
    """Fixed-count grid ``{1..k_max} x {1..lbar_max}`` with a uniform prior."""
    if int(k_max) != k_max or int(lbar_max) != lbar_max or k_max < 1 or lbar_max < 1:
        raise UsageError("k_max and lbar_max must be positive integers")
    keys = tuple(ExpertKey(k, l) for k in range(1, k_max + 1) for l in range(1, lbar_max + 1))
    return ExpertGrid(keys, np.full(len(keys), 1.0 / len(keys)))


def fractional_grid(k_max: int, fractions: Sequence[float]) -> ExpertGrid:
    """Grid indexed by ``(k, l)`` where expert ``l`` uses ``floor(fractions[l-1] * n)`` neighbours."""
    keys = tuple(
        ExpertKey(k, l) for k in range(1, k_max + 1) for l in range(1, len(fractions) + 1)
    )
    return ExpertGrid(keys, np.full(len(keys), 1.0 / len(keys)), tuple(fractions))


@dataclass(frozen=True)
class EtaSchedule:
    """Learning-rate schedule ``n -> eta_n``.

    ``rule`` is ``"inv_sqrt"`` (``sqrt(1/n)``, the default) or ``"constant"``
    with the value in ``scale``. ``inv_sqrt`` is also multiplied by ``scale``.
    """

    rule: str = "inv_sqrt"
    scale: float = 1.0

    def __post_init__(self):
        if self.rule not in ("inv_sqrt", "constant"):
            raise UsageError(f"unknown eta rule {self.rule!r}")
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise UsageError("eta scale must be positive")

    def __call__(self, n: int) -> float:
        if n < 1:
            raise UsageError("eta is defined for n >= 1")
        if self.rule == "constant":
            return self.scale
        return self.scale * math.sqrt(1.0 / n)

    @classmethod
    def parse(cls, text: str) -> "EtaSchedule":
        """Parse ``inv_sqrt``, ``inv_sqrt:<scale>`` or ``constant:<value>``."""
        name, _, arg = text.partition(":")
        try:
            return cls(name, float(arg) if arg else 1.0)
        except ValueError:
            raise UsageError(f"cannot parse eta schedule {text!r}") from None


def _lbar_cap(key: ExpertKey) -> float:
    return float(key.lbar)


@dataclass(frozen=True)
class TruncationPolicy:
    """Clamp of expert outputs to ``[-a, a]`` with ``a = min(n**delta, cap_rule(key))``.

    Off by default.
    """

    enabled: bool = False
    delta: float = 0.2
    cap_rule: Callable[[ExpertKey], float] = field(default=_lbar_cap, compare=False)

    def __post_init__(self):
        if self.enabled and not 0 < self.delta < 0.25:
            raise UsageError("truncation delta must lie in (0, 1/4)")

    def bound(self, n: int, key: ExpertKey) -> float:
        return min(float(n) ** self.delta, float(self.cap_rule(key)))
