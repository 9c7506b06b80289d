"""Exact two-variable envelope fits via convex-hull geometry.

The fitted lower (upper) envelope is the rightmost lower-hull (upper-hull)
edge: the maximal-slope (minimal-slope) line supporting the hull, which by
convexity lies below (above) every point, so violations are zero by
construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SLACK = 1e-9


class DegenerateProfileError(ValueError):
    pass


@dataclass(frozen=True)
class FitResult:
    alpha: float
    beta: float
    direction: str          # "lower" or "upper"
    violations: int
    method: str
    support: tuple          # the two hull points realizing the fitted line

    def bound(self, x):
        x = np.asarray(x, dtype=float)
        if self.direction == "lower":
            return self.alpha * x - self.beta
        return self.alpha * x + self.beta


def _dedup(xs, ys, keep: str):
    """One point per x: the lowest (lower fit) or highest (upper fit)."""
    best = {}
    for x, y in zip(xs, ys):
        x, y = float(x), float(y)
        if x not in best:
            best[x] = y
        elif keep == "min":
            best[x] = min(best[x], y)
        else:
            best[x] = max(best[x], y)
    return sorted(best.items())


def _hull(points, lower: bool):
    """Monotone-chain hull over x-sorted points, collinear points dropped."""
    hull = []
    sign = 1.0 if lower else -1.0
    for p in points:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            cross = (x2 - x1) * (p[1] - y1) - (p[0] - x1) * (y2 - y1)
            if sign * cross <= 0:
                hull.pop()
            else:
                break
        hull.append(p)
    return hull


def _fit(xs, ys, direction: str) -> FitResult:
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size == 0:
        raise DegenerateProfileError("empty profile")
    points = _dedup(xs, ys, "min" if direction == "lower" else "max")
    if len(points) < 2:
        raise DegenerateProfileError("all abscissae equal; envelope undetermined")
    hull = _hull(points, lower=(direction == "lower"))
    (x1, y1), (x2, y2) = hull[-2], hull[-1]
    alpha = (y2 - y1) / (x2 - x1)
    if direction == "lower":
        beta = alpha * x1 - y1
        violations = int(np.sum(ys < alpha * xs - beta - SLACK))
    else:
        beta = y1 - alpha * x1
        violations = int(np.sum(ys > alpha * xs + beta + SLACK))
    return FitResult(alpha=float(alpha), beta=float(beta), direction=direction,
                     violations=violations, method="hull-edge-LP",
                     support=((x1, y1), (x2, y2)))


def fit_lower_envelope(xs, ys) -> FitResult:
    """Max-slope line with -beta + alpha*x <= y on every point."""
    return _fit(xs, ys, "lower")


def fit_upper_envelope(xs, ys) -> FitResult:
    """Min-slope line with y <= alpha*x + beta on every point."""
    return _fit(xs, ys, "upper")
