"""Elliptical domains, the elliptical coordinate transform, and critical-area bounds.

The physical domain is the open ellipse x^2/A^2 + y^2/B^2 < 1 with A > B > 0.
It is mapped to a rectangle in (mu, theta) through

    x = a cosh(mu) cos(theta),   y = a sinh(mu) sin(theta),

with focal distance a = sqrt(A^2 - B^2) and boundary coordinate MU such that
a cosh(MU) = A and a sinh(MU) = B.  The transform is singular at the focal
points (mu, theta) = (0, 0) and (0, pi), which lie inside the domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DegenerateEllipse, FocalSingularity

# Critical quenching areas of rectangles with width/length ratio B/A, for the
# source f(u) = 1/(1-u).  Literature values, shipped as data (not recomputed).
RECT_CRITICAL_AREAS = {
    0.125: 18.8054,
    0.250: 9.6722,
    0.375: 6.8501,
    0.500: 5.5986,
    0.625: 4.9679,
    0.750: 4.6453,
    0.875: 4.4964,
}

_FOCAL_EPS = 1e-300


@dataclass(frozen=True)
class EllipseSpec:
    """Physical ellipse with semi-axes A > B > 0."""

    major_axis: float
    minor_axis: float

    def __post_init__(self):
        if not (self.minor_axis > 0.0):
            raise DegenerateEllipse("minor axis must be positive")
        if not (self.major_axis > self.minor_axis):
            raise DegenerateEllipse(
                "major axis must strictly exceed minor axis "
                f"(got A={self.major_axis}, B={self.minor_axis})"
            )

    @property
    def area(self) -> float:
        return math.pi * self.major_axis * self.minor_axis

    @property
    def ratio(self) -> float:
        return self.minor_axis / self.major_axis


@dataclass(frozen=True)
class EllipticalMap:
    """Coordinate-transform parameters: focal distance and mu-range bound."""

    focal_distance: float
    mu_boundary: float

    @property
    def major_axis(self) -> float:
        return self.focal_distance * math.cosh(self.mu_boundary)

    @property
    def minor_axis(self) -> float:
        return self.focal_distance * math.sinh(self.mu_boundary)


@dataclass(frozen=True)
class QuenchBounds:
    """Critical-quenching-area bracket for an ellipse of a given axis ratio.

    The bracket derives from critical areas of the maximal inscribed and the
    minimal circumscribed rectangle: a rectangle of area R_c inscribed in the
    ellipse occupies axes (A/sqrt2, B/sqrt2) giving ellipse area pi*R_c/2 as
    the upper bound, while the circumscribed rectangle gives pi*R_c/4 as the
    lower bound.
    """

    ratio: float
    rect_critical_area: float
    lower: float
    upper: float


def derive_map(spec: EllipseSpec) -> EllipticalMap:
    """Solve a cosh(MU) = A, a sinh(MU) = B for the transform parameters."""
    A, B = spec.major_axis, spec.minor_axis
    a = math.sqrt(A * A - B * B)
    mu = math.atanh(B / A)
    return EllipticalMap(focal_distance=a, mu_boundary=mu)


def to_cartesian(emap: EllipticalMap, mu, theta):
    """Map (mu, theta) to cartesian (x, y).  Accepts arrays."""
    import numpy as np

    a = emap.focal_distance
    return a * np.cosh(mu) * np.cos(theta), a * np.sinh(mu) * np.sin(theta)


def jacobian_phi(emap: EllipticalMap, mu, theta):
    """Transform Jacobian phi = 1 / (a^2 (sinh^2 mu + sin^2 theta)).

    Raises FocalSingularity when evaluated at (or numerically on top of) a
    focal point.  Accepts arrays.
    """
    import numpy as np

    a = emap.focal_distance
    denom = np.sinh(mu) ** 2 + np.sin(theta) ** 2
    if np.any(denom < _FOCAL_EPS):
        raise FocalSingularity("Jacobian evaluated at a focal point")
    return 1.0 / (a * a * denom)


def quench_area_bounds(ratio: float, rect_critical_area: float | None = None) -> QuenchBounds:
    """Critical-area bracket [pi R_c / 4, pi R_c / 2] for axis ratio B/A.

    ``rect_critical_area`` is the known critical area of a rectangle with the
    same width/length ratio; omitted, it is looked up from the shipped table.
    """
    if not (0.0 < ratio <= 1.0):
        raise ValueError(f"ratio must lie in (0, 1], got {ratio}")
    if rect_critical_area is None:
        try:
            rect_critical_area = RECT_CRITICAL_AREAS[round(ratio, 3)]
        except KeyError:
            raise ValueError(
                f"no tabulated rectangular critical area for ratio {ratio}; supply one"
            ) from None
    if not (rect_critical_area > 0.0):
        raise ValueError("rectangular critical area must be positive")
    lower = math.pi * rect_critical_area / 4.0
    upper = math.pi * rect_critical_area / 2.0
    return QuenchBounds(
        ratio=ratio, rect_critical_area=rect_critical_area, lower=lower, upper=upper
    )


def bounds_table() -> list[QuenchBounds]:
    """The full bracket table over all shipped axis ratios."""
    return [quench_area_bounds(r) for r in sorted(RECT_CRITICAL_AREAS)]


def ellipse_from_area(ratio: float, area: float) -> EllipseSpec:
    """Ellipse of a given axis ratio B/A and area pi*A*B."""
    if not (0.0 < ratio < 1.0):
        raise ValueError("ratio must lie in (0, 1) for a strict ellipse")
    A = math.sqrt(area / (math.pi * ratio))
    return EllipseSpec(major_axis=A, minor_axis=ratio * A)
