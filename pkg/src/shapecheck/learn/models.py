"""Learner results and the log-space projection shared by the proper learners."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from ..core.models import Pmf, _jsonable
from scipy.optimize import lsq_linear

from ..errors import SolverError, ValidationError


@dataclass
class LearnOutcome:
    """A learned pmf q with the index set S it is trusted on, or a rejection."""

    q: Optional[Pmf]
    support: Optional[np.ndarray]
    rejected: bool = False
    reason: str = ""
    info: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.rejected:
            if self.q is not None or self.support is not None:
                raise ValidationError("A rejected outcome carries no pmf or support")
            return
        if self.q is None or self.support is None:
            raise ValidationError("An accepted outcome needs both q and its support")
        support = np.unique(np.asarray(self.support, dtype=np.int64))
        if support.size and (support[0] < 0 or support[-1] >= self.q.n):
            raise ValidationError("Support indices fall outside the domain")
        self.support = support

    @classmethod
    def accept(cls, q: Pmf, support, **info: Any) -> "LearnOutcome":
        return cls(q, support, False, "", dict(info))

    @classmethod
    def reject(cls, reason: str, **info: Any) -> "LearnOutcome":
        return cls(None, None, True, reason, dict(info))

    def support_mass(self, p: Pmf) -> float:
        if self.support is None:
            return 0.0
        return float(p.mass[self.support].sum())

    def to_dict(self) -> dict:
        return {
            "rejected": self.rejected,
            "reason": self.reason or None,
            "q": self.q.mass.tolist() if self.q is not None else None,
            "support": self.support.tolist() if self.support is not None else None,
            "info": _jsonable(self.info),
        }


def concave_majorant(y: np.ndarray, x: Optional[np.ndarray] = None) -> np.ndarray:
    """Least concave majorant of the points (x_i, y_i), evaluated at x.

    x must be strictly increasing; it defaults to 0..len(y)-1.
    """
    y = np.asarray(y, dtype=float)
    x = np.arange(y.size, dtype=float) if x is None else np.asarray(x, dtype=float)
    if y.size <= 2:
        return y.copy()
    hull: list[int] = []
    for i in range(y.size):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            # b is dropped when it lies on or below the chord from a to i
            if (y[b] - y[a]) * (x[i] - x[a]) <= (y[i] - y[a]) * (x[b] - x[a]):
                hull.pop()
            else:
                break
        hull.append(i)
    return np.interp(x, x[hull], y[hull])


def concave_fit(
    y: np.ndarray,
    weights: np.ndarray,
    x: Optional[np.ndarray] = None,
    at: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Weighted least-squares concave fit to the points (x_i, y_i), evaluated at ``at``.

    The fit is piecewise linear with kinks only at points of positive weight and continues
    linearly past the outermost ones. Points of zero weight are ignored.

    Raises:
        ValidationError: If no point has positive weight
        SolverError: If the bounded least-squares solve fails
    """
    y = np.asarray(y, dtype=float)
    w = np.asarray(weights, dtype=float)
    x = np.arange(y.size, dtype=float) if x is None else np.asarray(x, dtype=float)
    at = x if at is None else np.asarray(at, dtype=float)
    live = np.flatnonzero(w > 0)
    if live.size == 0:
        raise ValidationError("concave_fit needs a point of positive weight")
    if live.size == 1:
        return np.full(at.shape, y[live[0]])
    x0, span = x[live[0]], x[live[-1]] - x[live[0]]
    kinks = (x[live[1:-1]] - x0) / span

    def basis(points: np.ndarray) -> np.ndarray:
        u = (points - x0) / span
        return np.column_stack([np.ones_like(u), u, -np.maximum(u[:, None] - kinks[None, :], 0.0)])

    root_w = np.sqrt(w[live])
    lower = np.concatenate([[-np.inf, -np.inf], np.zeros(kinks.size)])
    res = lsq_linear(basis(x[live]) * root_w[:, None], y[live] * root_w, bounds=(lower, np.inf), method="bvls")
    if res.status < 0:
        raise SolverError(f"concave least-squares fit failed: {res.message}")
    return basis(at) @ res.x
