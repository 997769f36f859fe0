"""Edge transmissibilities and the dual-side data that never needs the dual
basis itself.

The coupling coefficient of an edge is half the sum of the cotangents of the
opposite angles (one angle for a boundary edge).  On a strictly Delaunay mesh
with acute boundary angles every coefficient is positive, which is exactly
what the cell-centered solver needs.

The remaining objects quantify the prescribed divergence profile of the dual
test functions on one triangle: the minimum-norm quadratic ``delta`` with
unit mean and zero pairing against the three squared vertex distances, its
dimensionless energy ``I = |K| * int(delta^2)``, the closed-form evaluation
of that energy as a ratio of symmetric edge-length polynomials, and the
``nu`` upper bound used by the stability analysis.  The edge flux profile g
is a fixed quartic with unit mass, zero second moment and endpoint zeros.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from .mesh import Mesh, TriangleGeometry, quality_report
from .quadrature import (
    IntervalRule,
    TriangleRule,
    integrate_interval,
    interval_rule,
    triangle_rule,
)

__all__ = [
    "DualCoefficients",
    "DeltaK",
    "cotan_coefficients",
    "g_eval",
    "g_moments",
    "solve_delta_k",
    "delta_energy_closed_form",
    "nu_bound",
    "NU_SCALE",
]

# 8 * 3^5 * 23 / 5
NU_SCALE = 8942.4


@dataclass(frozen=True)
class DualCoefficients:
    """Per-edge coupling coefficients; ``admissible`` records whether the
    mesh passed the angle conditions (all coefficients positive)."""

    values: np.ndarray
    admissible: bool

    def __post_init__(self):
        self.values.flags.writeable = False


def cotan_coefficients(mesh: Mesh, report=None) -> DualCoefficients:
    """Cotangent coupling coefficients for every edge of the mesh.

    Internal edge: (cot(theta_K) + cot(theta_L)) / 2 over the two opposite
    angles; boundary edge: cot(theta_K) / 2.  Computed for any mesh; a
    warning is attached when the mesh fails the angle conditions, since a
    non-positive coefficient breaks uniqueness of the discrete problem.
    """
    report = report or quality_report(mesh)
    values = np.empty(mesh.num_edges)
    for e in range(mesh.num_edges):
        theta_k, theta_l = mesh.edge_opposite_angles(e)
        c = 0.5 / np.tan(theta_k)
        if theta_l is not None:
            c += 0.5 / np.tan(theta_l)
        values[e] = c
    if not report.admissible:
        warnings.warn(
            "mesh fails the angle conditions; some coupling coefficients are "
            "not positive and the discrete problem may be singular",
            stacklevel=2,
        )
    return DualCoefficients(values=values, admissible=bool(report.admissible))


def g_eval(s):
    """The fixed edge flux profile g(s) = 30 s (s-1) (21 s^2 - 21 s + 4)."""
    s = np.asarray(s, dtype=float)
    out = 30.0 * s * (s - 1.0) * (21.0 * s * s - 21.0 * s + 4.0)
    return float(out) if out.ndim == 0 else out


def g_moments(rule: IntervalRule | None = None) -> tuple[float, float, float]:
    """Moments (int g, int g s, int g s^2); exactly (1, 1/2, 0)."""
    rule = rule or interval_rule()
    return (
        integrate_interval(rule, g_eval),
        integrate_interval(rule, lambda s: g_eval(s) * s),
        integrate_interval(rule, lambda s: g_eval(s) * s * s),
    )


@dataclass(frozen=True)
class DeltaK:
    """Divergence profile on one triangle.

    ``coefficients`` expands delta in the basis {1, |x-W_1|^2, |x-W_2|^2,
    |x-W_3|^2}; ``energy`` is the dimensionless |K| * int(delta^2).
    """

    geometry: TriangleGeometry
    coefficients: np.ndarray
    energy: float

    def __call__(self, x, y):
        v = self.geometry.vertices
        out = np.full_like(np.asarray(x, dtype=float), self.coefficients[0])
        for i in range(3):
            out = out + self.coefficients[1 + i] * (
                (x - v[i, 0]) ** 2 + (y - v[i, 1]) ** 2
            )
        return out

    def moments(self, rule: TriangleRule | None = None) -> np.ndarray:
        """(int delta, int delta*|x-W_i|^2 for i=1..3) by quadrature."""
        rule = rule or triangle_rule()
        x = rule.points @ self.geometry.vertices
        vals = self(x[:, 0], x[:, 1])
        v = self.geometry.vertices
        out = np.empty(4)
        out[0] = self.geometry.area * float(rule.weights @ vals)
        for i in range(3):
            q = (x[:, 0] - v[i, 0]) ** 2 + (x[:, 1] - v[i, 1]) ** 2
            out[1 + i] = self.geometry.area * float(rule.weights @ (vals * q))
        return out


def solve_delta_k(geometry: TriangleGeometry, rule: TriangleRule | None = None) -> DeltaK:
    """Minimum-norm divergence profile meeting the four moment constraints.

    The minimizer lives in the span of the constraint functions, so it is
    the solution of the 4x4 Gram system of {1, |x-W_i|^2}.  The basis is
    rescaled by the area to keep the system's conditioning independent of
    the triangle size.  Requires a rule of degree >= 4 (quartic products).
    """
    rule = rule or triangle_rule()
    if rule.degree < 4:
        raise ValueError("delta solve needs a quadrature rule of degree >= 4")
    area = geometry.area
    x = rule.points @ geometry.vertices
    v = geometry.vertices
    basis = np.empty((4, len(rule.weights)))
    basis[0] = 1.0
    for i in range(3):
        basis[1 + i] = ((x[:, 0] - v[i, 0]) ** 2 + (x[:, 1] - v[i, 1]) ** 2) / area
    gram = np.einsum("q,iq,jq->ij", rule.weights, basis, basis) * area
    rhs = np.array([1.0, 0.0, 0.0, 0.0])
    try:
        scaled = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"singular moment system for triangle {v.tolist()}") from exc
    coeffs = np.concatenate([scaled[:1], scaled[1:] / area])
    vals = basis.T @ scaled
    energy = area * (area * float(rule.weights @ vals**2))
    coeffs.flags.writeable = False
    return DeltaK(geometry=geometry, coefficients=coeffs, energy=energy)


def _symmetric_sum(lengths: np.ndarray, pattern: tuple[int, int, int]) -> float:
    # sum over distinct monomials |a_i|^n |a_j|^m |a_k|^p; a repeated exponent
    # pattern contributes each monomial once (so (1,1,1) gives the plain
    # product and (2,2,0) the three pairwise products)
    return float(
        sum(
            lengths[0] ** e[0] * lengths[1] ** e[1] * lengths[2] ** e[2]
            for e in set(itertools.permutations(pattern))
        )
    )


def delta_denominator(geometry: TriangleGeometry) -> float:
    """Degree-4 symmetric polynomial D = (7/4) sigma_4 - (1/2) Sigma_{2,2,0}."""
    lengths = geometry.edge_lengths
    return 1.75 * float(np.sum(lengths**4)) - 0.5 * _symmetric_sum(lengths, (2, 2, 0))


def delta_numerator(geometry: TriangleGeometry) -> float:
    """Degree-12 symmetric polynomial pairing with D in the energy formula."""
    lengths = geometry.edge_lengths
    product4 = float(np.prod(lengths)) ** 4
    return (
        9.0 * float(np.sum(lengths**12))
        - 15.0 * _symmetric_sum(lengths, (10, 2, 0))
        + 15.0 * _symmetric_sum(lengths, (8, 4, 0))
        - 33.0 * _symmetric_sum(lengths, (8, 2, 2))
        - 18.0 * _symmetric_sum(lengths, (6, 6, 0))
        + 48.0 * _symmetric_sum(lengths, (6, 4, 2))
        + 558.0 * product4
    )


def delta_energy_closed_form(geometry: TriangleGeometry) -> float:
    """Closed-form energy I = N / (128 |K|^4 D) of the divergence profile."""
    return delta_numerator(geometry) / (
        128.0 * geometry.area**4 * delta_denominator(geometry)
    )


def nu_bound(theta_star: float) -> float:
    """Upper bound nu = 8942.4 / tan^4(theta) on the divergence-profile energy
    over all triangles with minimum angle at least ``theta_star``."""
    if not 0.0 < theta_star < np.pi / 2:
        raise ValueError("theta_star must lie in (0, pi/2)")
    return NU_SCALE / np.tan(theta_star) ** 4
