"""Bounded utility functions of a long-run average rate.

Every utility maps ``[0, 1]`` into ``[0, u_max]`` with ``u_max < 1``; the
learning dynamics rely on ``1 - U(r) > 0`` so that becoming content is
always a rare event.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError

NORMALIZED_LOG = 0
PIECEWISE_LINEAR = 1


@dataclass(frozen=True)
class NormalizedLog:
    """``u_max * (log(delta + r) - log(delta)) / (log(1 + delta) - log(delta))``.

    A rescaled ``log(delta + r)`` so that ``U(0) = 0`` and ``U(1) = u_max``.
    """

    delta: float = 0.01
    u_max: float = 0.9

    def __post_init__(self):
        if not self.delta > 0:
            raise DomainError(f"delta must be positive, got {self.delta}")
        if not 0 < self.u_max < 1:
            raise DomainError(f"u_max must lie in (0, 1), got {self.u_max}")

    @property
    def _scale(self) -> float:
        return self.u_max / (math.log(1.0 + self.delta) - math.log(self.delta))

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = self._scale * (np.log(self.delta + r) - math.log(self.delta))
        return float(out) if out.ndim == 0 else out

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        out = self._scale / (self.delta + r)
        return float(out) if out.ndim == 0 else out

    @property
    def lipschitz(self) -> float:
        return self._scale / self.delta

    increasing = True

    def to_dict(self) -> dict:
        return {"kind": "normalized_log", "delta": self.delta, "u_max": self.u_max}


@dataclass(frozen=True)
class PiecewiseLinear:
    """Linear interpolation through ``(xs[k], ys[k])`` on ``[0, 1]``."""

    xs: tuple
    ys: tuple

    def __post_init__(self):
        xs = tuple(float(x) for x in self.xs)
        ys = tuple(float(y) for y in self.ys)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        if len(xs) < 2 or len(xs) != len(ys):
            raise DomainError("piecewise-linear utility needs at least two (x, y) points")
        if xs[0] != 0.0 or xs[-1] != 1.0 or any(b <= a for a, b in zip(xs, xs[1:])):
            raise DomainError("breakpoints must increase strictly from 0 to 1")
        if min(ys) < 0 or max(ys) >= 1:
            raise DomainError("utility values must lie in [0, 1)")

    @classmethod
    def linear(cls, u_max: float = 0.9) -> "PiecewiseLinear":
        return cls((0.0, 1.0), (0.0, u_max))

    @property
    def u_max(self) -> float:
        return max(self.ys)

    def __call__(self, r):
        out = np.interp(np.asarray(r, dtype=float), self.xs, self.ys)
        return float(out) if np.ndim(out) == 0 else out

    def derivative(self, r):
        # left derivative; right derivative at x = 0
        xs, ys = np.asarray(self.xs), np.asarray(self.ys)
        slopes = np.diff(ys) / np.diff(xs)
        r = np.asarray(r, dtype=float)
        seg = np.clip(np.searchsorted(xs, r, side="left") - 1, 0, len(slopes) - 1)
        out = slopes[seg]
        return float(out) if out.ndim == 0 else out

    @property
    def lipschitz(self) -> float:
        return float(np.max(np.abs(np.diff(self.ys) / np.diff(self.xs))))

    @property
    def increasing(self) -> bool:
        return all(b >= a for a, b in zip(self.ys, self.ys[1:]))

    def to_dict(self) -> dict:
        return {"kind": "piecewise_linear", "points": [[x, y] for x, y in zip(self.xs, self.ys)]}


def utility_from_dict(d: dict):
    kind = d.get("kind")
    if kind == "normalized_log":
        return NormalizedLog(delta=float(d.get("delta", 0.01)), u_max=float(d.get("u_max", 0.9)))
    if kind == "piecewise_linear":
        pts = d["points"]
        return PiecewiseLinear(tuple(p[0] for p in pts), tuple(p[1] for p in pts))
    raise DomainError(f"unknown utility kind {kind!r}")


class UtilityProfile:
    """One utility function per user.

    >>> prof = UtilityProfile.uniform(NormalizedLog(), 2)
    >>> prof.total([1.0, 0.0])
    0.9
    """

    def __init__(self, functions: Sequence):
        if not functions:
            raise DomainError("utility profile needs at least one user")
        self.functions = tuple(functions)
        self.u_max = max(f.u_max for f in self.functions)
        if not self.u_max < 1:
            raise DomainError("u_max must be < 1")

    @classmethod
    def uniform(cls, fn, num_users: int) -> "UtilityProfile":
        return cls([fn] * num_users)

    def __len__(self):
        return len(self.functions)

    def __getitem__(self, i):
        return self.functions[i]

    @property
    def increasing(self) -> bool:
        return all(f.increasing for f in self.functions)

    def values(self, rates) -> np.ndarray:
        """Per-user utilities; ``rates`` has shape ``(..., N)``."""
        rates = np.asarray(rates, dtype=float)
        out = np.empty_like(rates)
        for i, f in enumerate(self.functions):
            out[..., i] = f(rates[..., i])
        return out

    def total(self, rates):
        out = self.values(rates).sum(axis=-1)
        return float(out) if np.ndim(out) == 0 else out

    def gradient(self, rates) -> np.ndarray:
        rates = np.asarray(rates, dtype=float)
        out = np.empty_like(rates)
        for i, f in enumerate(self.functions):
            out[..., i] = f.derivative(rates[..., i])
        return out

    def kernel_params(self):
        """Flat arrays describing the profile for the compiled simulators."""
        n = len(self.functions)
        width = max(len(f.xs) if isinstance(f, PiecewiseLinear) else 2 for f in self.functions)
        kinds = np.zeros(n, dtype=np.int64)
        p0 = np.zeros(n)
        p1 = np.zeros(n)
        xs = np.zeros((n, width))
        ys = np.zeros((n, width))
        npts = np.zeros(n, dtype=np.int64)
        for i, f in enumerate(self.functions):
            if isinstance(f, NormalizedLog):
                kinds[i] = NORMALIZED_LOG
                p0[i] = f.delta
                p1[i] = f._scale
            elif isinstance(f, PiecewiseLinear):
                kinds[i] = PIECEWISE_LINEAR
                npts[i] = len(f.xs)
                xs[i, : len(f.xs)] = f.xs
                ys[i, : len(f.ys)] = f.ys
            else:
                raise DomainError(f"no compiled form for utility {f!r}")
        return kinds, p0, p1, xs, ys, npts

    def to_dict(self) -> dict:
        dicts = [f.to_dict() for f in self.functions]
        if all(d == dicts[0] for d in dicts):
            return dicts[0]
        return {"kind": "per_user", "users": dicts}

    @classmethod
    def from_dict(cls, d: dict, num_users: int) -> "UtilityProfile":
        if d.get("kind") == "per_user":
            users = d["users"]
            if len(users) != num_users:
                raise DomainError("per-user utility list length differs from num_users")
            return cls([utility_from_dict(u) for u in users])
        return cls.uniform(utility_from_dict(d), num_users)
