"""Fixed quadrature rules on the reference triangle and the unit interval.

Both rules are embedded constant tables, normalized so the weights sum to 1,
and self-test their declared polynomial exactness degree at construction.
The triangle rule is the symmetric 12-point rule of degree 6 (quartics such
as the squared divergence profile integrate exactly, with headroom for the
degree-6 error-norm contract); the interval rule is 4-point Gauss-Legendre
mapped to (0,1), exact through degree 7.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .mesh import TriangleGeometry

__all__ = [
    "TriangleRule",
    "IntervalRule",
    "triangle_rule",
    "interval_rule",
    "integrate_triangle",
    "integrate_interval",
]

_REFERENCE_TRIANGLE = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def _monomial_over_reference(a: int, b: int) -> float:
    # int_T x^a y^b over the unit reference triangle
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


@dataclass(frozen=True)
class TriangleRule:
    """Barycentric nodes and weights on the reference triangle; weights sum to 1."""

    points: np.ndarray   # (nq, 3) barycentric coordinates
    weights: np.ndarray  # (nq,)
    degree: int

    def __post_init__(self):
        object.__setattr__(self, "points", np.asarray(self.points, dtype=float))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        if abs(self.weights.sum() - 1.0) > 1e-14:
            raise ValueError("triangle rule weights must sum to 1")
        x = self.points @ _REFERENCE_TRIANGLE
        for d in range(self.degree + 1):
            for a in range(d + 1):
                b = d - a
                exact = _monomial_over_reference(a, b)
                approx = 0.5 * float(self.weights @ (x[:, 0] ** a * x[:, 1] ** b))
                if abs(approx - exact) > 1e-13:
                    raise ValueError(
                        f"triangle rule fails exactness for x^{a} y^{b}: "
                        f"{approx} vs {exact}"
                    )
        self.points.flags.writeable = False
        self.weights.flags.writeable = False


@dataclass(frozen=True)
class IntervalRule:
    """Nodes in (0,1) and weights summing to 1."""

    points: np.ndarray
    weights: np.ndarray
    degree: int

    def __post_init__(self):
        object.__setattr__(self, "points", np.asarray(self.points, dtype=float))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        if abs(self.weights.sum() - 1.0) > 1e-14:
            raise ValueError("interval rule weights must sum to 1")
        if self.points.min() <= 0.0 or self.points.max() >= 1.0:
            raise ValueError("interval rule nodes must lie strictly inside (0,1)")
        for k in range(self.degree + 1):
            approx = float(self.weights @ self.points**k)
            if abs(approx - 1.0 / (k + 1)) > 1e-13:
                raise ValueError(f"interval rule fails exactness for s^{k}")
        self.points.flags.writeable = False
        self.weights.flags.writeable = False


def _dunavant6() -> TriangleRule:
    # Symmetric degree-6 rule: two 3-point orbits and one 6-point orbit.
    orbits3 = [
        (0.501426509658179, 0.249286745170910, 0.116786275726379),
        (0.873821971016996, 0.063089014491502, 0.050844906370207),
    ]
    orbit6 = (0.053145049844817, 0.310352451033784, 0.082851075618374)
    points, weights = [], []
    for a, b, w in orbits3:
        for bary in ((a, b, b), (b, a, b), (b, b, a)):
            points.append(bary)
            weights.append(w)
    a, b, w = orbit6
    c = 1.0 - a - b
    for bary in sorted(set(itertools.permutations((a, b, c)))):
        points.append(bary)
        weights.append(w)
    return TriangleRule(np.array(points), np.array(weights), degree=6)


def _gauss4_unit() -> IntervalRule:
    # 4-point Gauss-Legendre on (0,1), degree 7.
    r30 = math.sqrt(30.0)
    t_inner = math.sqrt(3.0 / 7.0 - 2.0 / 7.0 * math.sqrt(6.0 / 5.0))
    t_outer = math.sqrt(3.0 / 7.0 + 2.0 / 7.0 * math.sqrt(6.0 / 5.0))
    nodes = np.array([-t_outer, -t_inner, t_inner, t_outer])
    weights = np.array(
        [(18.0 - r30) / 36.0, (18.0 + r30) / 36.0, (18.0 + r30) / 36.0, (18.0 - r30) / 36.0]
    )
    return IntervalRule((nodes + 1.0) / 2.0, weights / 2.0, degree=7)


_TRIANGLE_RULE = _dunavant6()
_INTERVAL_RULE = _gauss4_unit()


def triangle_rule() -> TriangleRule:
    """The default symmetric triangle rule (degree 6)."""
    return _TRIANGLE_RULE


def interval_rule() -> IntervalRule:
    """The default Gauss rule on (0,1) (degree 7)."""
    return _INTERVAL_RULE


def physical_points(rule: TriangleRule, geometry: TriangleGeometry) -> np.ndarray:
    """Map the rule's barycentric nodes onto a physical triangle, shape (nq, 2)."""
    return rule.points @ geometry.vertices


def integrate_triangle(rule: TriangleRule, geometry: TriangleGeometry, f) -> float:
    """Integrate ``f(x, y)`` over a triangle.

    ``f`` must accept numpy arrays of coordinates.  Exact for polynomials up
    to the rule's degree.
    """
    x = physical_points(rule, geometry)
    return geometry.area * float(rule.weights @ np.asarray(f(x[:, 0], x[:, 1]), dtype=float))


def integrate_interval(rule: IntervalRule, f) -> float:
    """Integrate ``f(s)`` over (0,1); ``f`` must accept numpy arrays."""
    return float(rule.weights @ np.asarray(f(rule.points), dtype=float))
