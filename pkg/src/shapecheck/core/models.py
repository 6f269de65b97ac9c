"""Domain types: probability mass functions, sample counts, class ids and verdicts."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import reduce
from typing import Any, Optional, Sequence

import numpy as np

from ..errors import DimensionMismatchError, ValidationError

# Absolute tolerance on the total mass of a Pmf.
SUM_TOL = 1e-9


def _normalize_dims(dims: Optional[Sequence[int]], n: int) -> Optional[tuple[int, ...]]:
    if dims is None:
        return None
    dims = tuple(int(d) for d in dims)
    if not dims or any(d < 1 for d in dims):
        raise ValidationError(f"Grid dims must be positive integers, got {dims}")
    if int(np.prod(dims)) != n:
        raise DimensionMismatchError(f"Product of dims {dims} is {int(np.prod(dims))}, expected {n}")
    return dims


@dataclass(frozen=True, eq=False)
class Pmf:
    """A probability mass function over [n] or a row-major d-dimensional grid.

    The mass vector is copied and frozen on construction.
    """

    mass: np.ndarray
    dims: Optional[tuple[int, ...]] = None  # per-axis sizes; None means a 1-d domain

    def __post_init__(self):
        mass = np.array(self.mass, dtype=float).ravel()
        if mass.size == 0:
            raise ValidationError("A pmf needs at least one element")
        if not np.all(np.isfinite(mass)):
            raise ValidationError("Pmf entries must be finite")
        if np.any(mass < 0):
            raise ValidationError(f"Pmf entries must be nonnegative (min {mass.min():.3g})")
        total = float(mass.sum())
        if abs(total - 1.0) > SUM_TOL:
            raise ValidationError(f"Pmf entries sum to {total!r}, not 1")
        dims = _normalize_dims(self.dims, mass.size)
        mass.setflags(write=False)
        object.__setattr__(self, "mass", mass)
        object.__setattr__(self, "dims", dims)

    @property
    def n(self) -> int:
        return int(self.mass.size)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.dims if self.dims is not None else (self.n,)

    @property
    def d(self) -> int:
        return len(self.shape)

    @classmethod
    def uniform(cls, n: int, dims: Optional[Sequence[int]] = None) -> "Pmf":
        return cls(np.full(n, 1.0 / n), dims=dims)

    @classmethod
    def point_mass(cls, n: int, i: int) -> "Pmf":
        mass = np.zeros(n)
        mass[i] = 1.0
        return cls(mass)

    @classmethod
    def from_weights(
        cls,
        weights: Sequence[float] | np.ndarray,
        dims: Optional[Sequence[int]] = None,
        clip_tol: float = 0.0,
    ) -> "Pmf":
        """Normalize nonnegative weights into a Pmf.

        Args:
            weights: Nonnegative weights (any positive total)
            dims: Optional grid dims
            clip_tol: Negative entries above ``-clip_tol`` are clipped to zero

        Raises:
            ValidationError: If a weight is below ``-clip_tol`` or all weights are zero
        """
        w = np.array(weights, dtype=float).ravel()
        if np.any(w < -clip_tol):
            raise ValidationError(f"Weights must be nonnegative (min {w.min():.3g})")
        w = np.clip(w, 0.0, None)
        total = w.sum()
        if not np.isfinite(total) or total <= 0:
            raise ValidationError("Weights must have a positive finite total")
        return cls(w / total, dims=dims)

    @classmethod
    def tensor(cls, *factors: "Pmf") -> "Pmf":
        """Outer product of pmfs; the result's dims concatenate the factors' shapes."""
        if not factors:
            raise ValidationError("tensor() needs at least one factor")
        joint = reduce(np.multiply.outer, (f.mass.reshape(f.shape) for f in factors))
        dims = tuple(s for f in factors for s in f.shape)
        return cls(joint.ravel() / joint.sum(), dims=dims)

    def grid(self) -> np.ndarray:
        """Read-only view of the mass with the grid shape."""
        return self.mass.reshape(self.shape)

    def cdf(self) -> np.ndarray:
        """Prefix sums over the flat (row-major) order."""
        return np.cumsum(self.mass)

    def marginals(self) -> list["Pmf"]:
        """Per-axis marginal pmfs of a grid pmf (a 1-d pmf is its own marginal)."""
        g = self.grid()
        out = []
        for axis in range(g.ndim):
            other = tuple(a for a in range(g.ndim) if a != axis)
            out.append(Pmf.from_weights(g.sum(axis=other) if other else g))
        return out

    def allclose(self, other: "Pmf", atol: float = 1e-12) -> bool:
        return self.shape == other.shape and bool(np.allclose(self.mass, other.mass, rtol=0.0, atol=atol))

    def __repr__(self) -> str:
        return f"Pmf(n={self.n}, dims={self.dims})"


@dataclass(frozen=True, eq=False)
class SampleCounts:
    """Per-symbol occurrence counts N_i of one sample."""

    counts: np.ndarray
    m_nominal: int  # requested m; the Poisson mean under Poissonization
    dims: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        raw = np.asarray(self.counts).ravel()
        if raw.size == 0:
            raise ValidationError("Counts need at least one element")
        if np.any(raw < 0) or not np.all(np.equal(np.mod(raw, 1), 0)):
            raise ValidationError("Counts must be nonnegative integers")
        counts = raw.astype(np.int64)
        if int(self.m_nominal) < 0:
            raise ValidationError(f"m_nominal must be nonnegative, got {self.m_nominal}")
        dims = _normalize_dims(self.dims, counts.size)
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "m_nominal", int(self.m_nominal))
        object.__setattr__(self, "dims", dims)

    @property
    def n(self) -> int:
        return int(self.counts.size)

    @property
    def m_actual(self) -> int:
        return int(self.counts.sum())

    @property
    def shape(self) -> tuple[int, ...]:
        return self.dims if self.dims is not None else (self.n,)

    def marginals(self) -> list["SampleCounts"]:
        """Per-axis counts of a grid sample; every axis keeps the same m."""
        g = self.counts.reshape(self.shape)
        out = []
        for axis in range(g.ndim):
            other = tuple(a for a in range(g.ndim) if a != axis)
            out.append(SampleCounts(g.sum(axis=other) if other else g, self.m_nominal))
        return out

    def __repr__(self) -> str:
        return f"SampleCounts(n={self.n}, m_nominal={self.m_nominal}, m_actual={self.m_actual})"


class ClassKind(str, Enum):
    """Shape classes a distribution can be tested against."""

    MONOTONE = "monotone"
    UNIMODAL = "unimodal"
    LOG_CONCAVE = "logconcave"
    MHR = "mhr"
    PRODUCT = "product"
    SINGLE_TARGET = "identity"


@dataclass(frozen=True, eq=False)
class ClassId:
    """A class of distributions, with the parameters some kinds need."""

    kind: ClassKind
    d: int = 1  # dimension for MONOTONE
    dims: Optional[tuple[int, ...]] = None  # grid dims for MONOTONE(d>1) and PRODUCT
    target: Optional[Pmf] = None  # the single member of SINGLE_TARGET

    def __post_init__(self):
        kind = ClassKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.dims is not None:
            object.__setattr__(self, "dims", tuple(int(x) for x in self.dims))
        if kind is ClassKind.MONOTONE and self.d < 1:
            raise ValidationError(f"Monotone(d) requires d >= 1, got {self.d}")
        if kind is ClassKind.MONOTONE and self.dims is not None and len(self.dims) != self.d:
            raise DimensionMismatchError(f"Monotone({self.d}) got {len(self.dims)} dims")
        if kind is ClassKind.PRODUCT and (self.dims is None or len(self.dims) < 2):
            raise ValidationError("Product requires at least two axes")
        if kind is ClassKind.SINGLE_TARGET and self.target is None:
            raise ValidationError("SingleTarget requires a target pmf")

    @classmethod
    def monotone(cls, d: int = 1, dims: Optional[Sequence[int]] = None) -> "ClassId":
        return cls(ClassKind.MONOTONE, d=d, dims=tuple(dims) if dims is not None else None)

    @classmethod
    def unimodal(cls) -> "ClassId":
        return cls(ClassKind.UNIMODAL)

    @classmethod
    def log_concave(cls) -> "ClassId":
        return cls(ClassKind.LOG_CONCAVE)

    @classmethod
    def mhr(cls) -> "ClassId":
        return cls(ClassKind.MHR)

    @classmethod
    def product(cls, dims: Sequence[int]) -> "ClassId":
        return cls(ClassKind.PRODUCT, dims=tuple(dims))

    @classmethod
    def single_target(cls, target: Pmf) -> "ClassId":
        return cls(ClassKind.SINGLE_TARGET, target=target)

    @property
    def label(self) -> str:
        if self.kind is ClassKind.MONOTONE:
            return f"monotone(d={self.d})"
        if self.kind is ClassKind.PRODUCT:
            return f"product{self.dims}"
        return self.kind.value


class Decision(str, Enum):
    ACCEPT = "accept"
    REJECT = "reject"


@dataclass
class TestVerdict:
    """Outcome of a tester.

    ``statistic``/``threshold`` describe the gate that decided; gates without a numeric
    statistic (a learner rejecting, say) leave both unset.
    """

    __test__ = False  # keep pytest from collecting this class

    decision: Decision
    statistic: Optional[float] = None
    threshold: Optional[float] = None
    excluded_mass: float = 0.0
    detail: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_gate(
        cls,
        statistic: float,
        threshold: float,
        excluded_mass: float = 0.0,
        **detail: Any,
    ) -> "TestVerdict":
        """Accept iff ``statistic <= threshold``."""
        decision = Decision.ACCEPT if statistic <= threshold else Decision.REJECT
        return cls(decision, float(statistic), float(threshold), float(excluded_mass), dict(detail))

    @classmethod
    def reject(cls, excluded_mass: float = 0.0, **detail: Any) -> "TestVerdict":
        return cls(Decision.REJECT, None, None, float(excluded_mass), dict(detail))

    @property
    def accepted(self) -> bool:
        return self.decision is Decision.ACCEPT

    def to_dict(self) -> dict:
        """Convert to a JSON-ready dictionary."""
        return {
            "decision": self.decision.value,
            "statistic": self.statistic,
            "threshold": self.threshold,
            "excluded_mass": self.excluded_mass,
            "detail": _jsonable(self.detail),
        }


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Enum):
        return value.value
    return value
