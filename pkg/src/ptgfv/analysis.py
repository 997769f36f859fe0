"""Verification instruments: manufactured-solution error norms and rates,
randomized checks of the closed-form lemmas, and the stability inequalities.

Everything randomized is seeded and reproducible.  Random triangles draw
their vertices uniformly in the unit square and reject a minimum angle below
5 degrees; every bound is then checked against the sampled triangle's own
minimum angle, never a global one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dual import (
    DualCoefficients,
    cotan_coefficients,
    delta_denominator,
    delta_energy_closed_form,
    delta_numerator,
    nu_bound,
    solve_delta_k,
)
from .mesh import Mesh, TriangleGeometry, generate_rhombus_equilateral, quality_report
from .quadrature import TriangleRule, triangle_rule
from .solver import Solution
from .spaces import local_fluxes, local_gram_closed_form

__all__ = [
    "ManufacturedCase",
    "CASES",
    "error_norms",
    "ConvergenceLevel",
    "ConvergenceReport",
    "convergence_study",
    "CheckResult",
    "LemmaSuiteReport",
    "lemma_suite",
    "StabilityReport",
    "stability_check",
    "random_triangle",
    "random_acute_triangle",
    "random_triangle_min_angle",
    "circumcenter_edge_distances",
]

MIN_SAMPLE_ANGLE = math.radians(5.0)


@dataclass(frozen=True)
class ManufacturedCase:
    """Analytic solution/source pair with a domain generator.

    ``u``, ``f`` map coordinate arrays to value arrays; ``grad_u`` returns
    the pair of partial derivatives.  All built-in cases vanish on their
    domain boundary.
    """

    name: str
    generator: object  # Callable[[int], Mesh]
    u: object          # Callable[(x, y) arrays] -> array
    f: object
    grad_u: object     # Callable -> (ux, uy)


def _make_rhombus_sine() -> ManufacturedCase:
    s3 = math.sqrt(3.0)
    pi = math.pi

    # skew coordinates of the rhombus: both run over (0, 1) inside the domain
    def xi(x, y):
        return x - y / s3

    def eta(x, y):
        return 2.0 * y / s3

    def u(x, y):
        return np.sin(pi * xi(x, y)) * np.sin(pi * eta(x, y))

    def f(x, y):
        return (4.0 * pi**2 / 3.0) * (
            2.0 * np.sin(pi * xi(x, y)) * np.sin(pi * eta(x, y))
            + np.cos(pi * xi(x, y)) * np.cos(pi * eta(x, y))
        )

    def grad_u(x, y):
        cs = np.cos(pi * xi(x, y)) * np.sin(pi * eta(x, y))
        sc = np.sin(pi * xi(x, y)) * np.cos(pi * eta(x, y))
        return pi * cs, pi * (-cs / s3 + 2.0 * sc / s3)

    return ManufacturedCase(
        name="rhombus-sine",
        generator=generate_rhombus_equilateral,
        u=u,
        f=f,
        grad_u=grad_u,
    )


CASES: dict[str, ManufacturedCase] = {"rhombus-sine": _make_rhombus_sine()}


def error_norms(
    mesh: Mesh,
    solution: Solution,
    case: ManufacturedCase,
    rule: TriangleRule | None = None,
) -> tuple[float, float, float]:
    """L2 errors (scalar, flux, flux divergence) of a discrete solution.

    The divergence error uses the identity div(grad u) = -f so the exact
    solution never has to be differentiated twice numerically.
    """
    rule = rule or triangle_rule()
    if rule.degree < 6:
        raise ValueError("error norms need a quadrature rule of degree >= 6")
    corners = mesh.vertices[mesh.triangles]                       # (nt, 3, 2)
    x = np.einsum("qk,tkd->tqd", rule.points, corners)            # (nt, nq, 2)
    areas = mesh.areas
    w = rule.weights

    u_vals = np.asarray(case.u(x[..., 0], x[..., 1]), dtype=float)
    eu2 = float(areas @ (((u_vals - solution.u.values[:, None]) ** 2) @ w))

    # affine flux per triangle: p(x) = a_t * x - b_t
    loc = local_fluxes(mesh, solution.p)                          # (nt, 3)
    a_t = loc.sum(axis=1) / (2.0 * areas)
    b_t = np.einsum("ti,tid->td", loc, corners) / (2.0 * areas[:, None])
    px = a_t[:, None] * x[..., 0] - b_t[:, None, 0]
    py = a_t[:, None] * x[..., 1] - b_t[:, None, 1]
    gx, gy = case.grad_u(x[..., 0], x[..., 1])
    ep2 = float(areas @ (((np.asarray(gx) - px) ** 2 + (np.asarray(gy) - py) ** 2) @ w))

    div_t = loc.sum(axis=1) / areas
    f_vals = np.asarray(case.f(x[..., 0], x[..., 1]), dtype=float)
    ediv2 = float(areas @ (((-f_vals - div_t[:, None]) ** 2) @ w))
    return math.sqrt(eu2), math.sqrt(ep2), math.sqrt(ediv2)


@dataclass(frozen=True)
class ConvergenceLevel:
    n: int
    h: float
    eu: float
    ep: float
    ediv: float
    combined: float
    iterations: int
    residual: float


@dataclass(frozen=True)
class ConvergenceReport:
    case: str
    levels: tuple[ConvergenceLevel, ...]

    def rates(self, key: str) -> list[float]:
        """Observed orders between consecutive levels for one error column."""
        vals = [getattr(level, key) for level in self.levels]
        hs = [level.h for level in self.levels]
        return [
            math.log(vals[i] / vals[i + 1]) / math.log(hs[i] / hs[i + 1])
            for i in range(len(vals) - 1)
        ]

    def final_rate(self, key: str) -> float:
        return self.rates(key)[-1]


def convergence_study(
    case: ManufacturedCase,
    levels: list[int],
    tol: float = 1e-12,
) -> ConvergenceReport:
    """Solve the case on a sequence of refinements and report errors/rates."""
    from .solver import assemble, solve
    from .spaces import interpolate_p0

    if len(levels) < 2:
        raise ValueError("a convergence study needs at least 2 levels")
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("levels must be strictly increasing")
    rows = []
    for n in levels:
        mesh = case.generator(n)
        coeffs = cotan_coefficients(mesh)
        f_t = interpolate_p0(case.f, mesh)
        solution = solve(assemble(mesh, coeffs, f_t), tol=tol)
        eu, ep, ediv = error_norms(mesh, solution, case)
        rows.append(
            ConvergenceLevel(
                n=n,
                h=mesh.h_max,
                eu=eu,
                ep=ep,
                ediv=ediv,
                combined=eu + math.hypot(ep, ediv),
                iterations=solution.iterations,
                residual=solution.residual,
            )
        )
    if any(b.h >= a.h for a, b in zip(rows, rows[1:])):
        raise ValueError("refinement did not decrease the mesh size")
    return ConvergenceReport(case=case.name, levels=tuple(rows))


def random_triangle(rng: np.random.Generator, min_angle: float = MIN_SAMPLE_ANGLE) -> TriangleGeometry:
    """Uniform-vertex triangle in the unit square with min angle >= min_angle."""
    while True:
        try:
            geom = TriangleGeometry.from_vertices(rng.uniform(size=(3, 2)))
        except ValueError:
            continue
        if geom.angles.min() >= min_angle:
            return geom


def random_acute_triangle(rng: np.random.Generator, min_angle: float = MIN_SAMPLE_ANGLE) -> TriangleGeometry:
    """As :func:`random_triangle` but with all angles strictly below pi/2."""
    while True:
        geom = random_triangle(rng, min_angle)
        if geom.angles.max() < math.pi / 2:
            return geom


def random_triangle_min_angle(rng: np.random.Generator, theta_star: float) -> TriangleGeometry:
    """Constructive sampler of a triangle whose minimum angle is >= theta_star.

    Draws the angle triple from the simplex {angles >= theta_star, sum pi}
    and builds the triangle from the law of sines under a random rotation
    and scale (rejection sampling would never terminate near 60 degrees).
    """
    if not 0.0 < theta_star <= math.pi / 3:
        raise ValueError("theta_star must lie in (0, pi/3]")
    angles = theta_star + (math.pi - 3.0 * theta_star) * rng.dirichlet(np.ones(3))
    rot = rng.uniform(0.0, 2.0 * math.pi)
    scale = math.exp(rng.uniform(-2.0, 2.0))
    a = np.array([0.0, 0.0])
    b = np.array([math.sin(angles[2]), 0.0])
    c = math.sin(angles[1]) * np.array([math.cos(angles[0]), math.sin(angles[0])])
    cs, sn = math.cos(rot), math.sin(rot)
    rmat = np.array([[cs, -sn], [sn, cs]])
    verts = scale * np.stack([a, b, c]) @ rmat.T + rng.uniform(-1.0, 1.0, size=2)
    return TriangleGeometry.from_vertices(verts)


def circumcenter_edge_distances(geometry: TriangleGeometry) -> np.ndarray:
    """Signed circumcenter-to-edge distances, positive towards the interior.

    Entry i belongs to the edge opposite vertex i and equals
    |a_i| * cot(angle_i) / 2 for any triangle (the distance itself on acute
    triangles, negative where the opposite angle is obtuse).
    """
    v = geometry.vertices
    out = np.empty(3)
    for i in range(3):
        p = v[(i + 1) % 3]
        q = v[(i + 2) % 3]
        mid = 0.5 * (p + q)
        tangent = (q - p) / np.hypot(*(q - p))
        inward = v[i] - mid
        inward -= tangent * float(inward @ tangent)
        inward /= np.hypot(*inward)
        out[i] = float((geometry.circumcenter - mid) @ inward)
    return out


class _Check:
    """Accumulates the worst slack and its witness for one named check.

    Slack >= 0 means the sample passed; the tolerance of equality-style
    checks is folded into the slack.
    """

    def __init__(self, name: str):
        self.name = name
        self.samples = 0
        self.worst = math.inf
        self.witness: list | None = None

    def update(self, slack: float, geometry: TriangleGeometry) -> None:
        self.samples += 1
        if slack < self.worst:
            self.worst = slack
            self.witness = geometry.vertices.tolist()

    def result(self) -> "CheckResult":
        return CheckResult(
            check=self.name,
            samples=self.samples,
            passed=bool(self.worst >= 0.0),
            worst_slack=self.worst,
            witness=self.witness,
        )


@dataclass(frozen=True)
class CheckResult:
    check: str
    samples: int
    passed: bool
    worst_slack: float
    witness: list | None

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "samples": self.samples,
            "passed": self.passed,
            "worst_slack": self.worst_slack,
            "witness": self.witness,
        }


@dataclass(frozen=True)
class LemmaSuiteReport:
    seed: int
    checks: tuple[CheckResult, ...]
    max_energy_ratio: float  # max observed I / nu(theta_min), expected << 1

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "all_passed": self.all_passed,
            "max_energy_ratio": self.max_energy_ratio,
            "checks": [c.to_dict() for c in self.checks],
        }


def lemma_suite(samples: int = 10000, seed: int = 42, triangles=None) -> LemmaSuiteReport:
    """Run every closed-form identity and bound on random triangles.

    ``triangles`` may supply an explicit list of geometries instead of the
    random sampler (the sample count is then ignored).
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    if triangles is None:
        triangles = (random_triangle(rng) for _ in range(samples))

    gyration = _Check("gyration-radius-bounds")
    eigen = _Check("mass-matrix-eigenvalue-bounds")
    trace = _Check("mass-matrix-trace-identity")
    determinant = _Check("mass-matrix-determinant-identity")
    minors = _Check("mass-matrix-pairwise-minor-identity")
    cotan_sum = _Check("cotangent-sum-identity")
    cotan_prod = _Check("cotangent-product-identity")
    energy_bound = _Check("divergence-profile-energy-bound")
    energy_match = _Check("divergence-profile-closed-form")
    denom_bound = _Check("denominator-lower-bound")
    numer_bound = _Check("numerator-upper-bound")
    circum = _Check("circumcenter-distance-identity")
    max_ratio = 0.0

    for geom in triangles:
        theta_min = float(geom.angles.min())
        ratio = geom.rho2 / geom.area
        gyration.update(
            min(ratio - 1.0 / 6.0, 1.0 / (3.0 * math.tan(theta_min)) - ratio) + 1e-12,
            geom,
        )

        gram = local_gram_closed_form(geom)
        eig = np.linalg.eigvalsh(gram)
        lam_lo = math.tan(theta_min) ** 2 / 48.0
        lam_hi = 5.0 / (4.0 * math.tan(theta_min))
        eigen.update(
            min(float(eig.min()) - lam_lo, lam_hi - float(eig.max())) + 1e-12, geom
        )

        tr = float(np.trace(gram))
        tr_expected = 15.0 * ratio / 4.0
        trace.update(1e-10 - abs(tr - tr_expected) / tr_expected, geom)
        det = float(np.linalg.det(gram))
        det_expected = geom.rho2 / (16.0 * geom.area)
        determinant.update(1e-10 - abs(det - det_expected) / det_expected, geom)
        pairwise = sum(
            gram[i, i] * gram[(i + 1) % 3, (i + 1) % 3] - gram[i, (i + 1) % 3] ** 2
            for i in range(3)
        )
        pairwise_expected = 1.0 / 12.0 + 2.25 * ratio**2
        minors.update(1e-10 - abs(pairwise - pairwise_expected) / pairwise_expected, geom)

        cot = 1.0 / np.tan(geom.angles)
        cotan_sum.update(
            1e-11 - abs(float(cot.sum()) - 9.0 * ratio) / (9.0 * ratio), geom
        )
        cotan_prod.update(
            1e-11 - abs(float(cot[0] * cot[1] + cot[1] * cot[2] + cot[2] * cot[0]) - 1.0),
            geom,
        )

        energy = solve_delta_k(geom).energy
        nu = nu_bound(theta_min)
        energy_bound.update(1.0 - energy / nu, geom)
        max_ratio = max(max_ratio, energy / nu)
        closed = delta_energy_closed_form(geom)
        energy_match.update(1e-8 - abs(energy - closed) / closed, geom)

        sigma2 = float(np.sum(geom.edge_lengths**2))
        denom_bound.update(
            delta_denominator(geom) / sigma2**2 - 5.0 / 12.0 + 1e-12, geom
        )
        numer_bound.update(23.0 - delta_numerator(geom) / sigma2**6, geom)

        dist = circumcenter_edge_distances(geom)
        err = np.abs(0.5 / np.tan(geom.angles) - dist / geom.edge_lengths)
        circum.update(1e-11 - float(err.max()), geom)

    checks = tuple(
        c.result()
        for c in (
            gyration,
            eigen,
            trace,
            determinant,
            minors,
            cotan_sum,
            cotan_prod,
            energy_bound,
            energy_match,
            denom_bound,
            numer_bound,
            circum,
        )
    )
    return LemmaSuiteReport(seed=seed, checks=checks, max_energy_ratio=max_ratio)


@dataclass(frozen=True)
class StabilityReport:
    """Observed stability ratios for random flux fields against the explicit
    constants of the convergence analysis."""

    theta_min: float
    theta_max: float
    trials: int
    bound_h1: float          # (2/5) cot(theta_max) tan(theta_min)
    bound_h3: float          # exactly 1
    bound_h4: float          # sqrt(nu(theta_min))
    h1_min_ratio: float
    h3_max_deviation: float  # max |ratio - 1|
    h4_max_ratio: float
    max_energy: float        # max per-triangle |K| int(delta^2)
    passed_h1: bool = field(init=False)
    passed_h3: bool = field(init=False)
    passed_h4: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "passed_h1", bool(self.h1_min_ratio >= self.bound_h1 - 1e-12))
        object.__setattr__(self, "passed_h3", bool(self.h3_max_deviation <= 1e-12))
        object.__setattr__(self, "passed_h4", bool(self.h4_max_ratio <= self.bound_h4))

    @property
    def all_passed(self) -> bool:
        return self.passed_h1 and self.passed_h3 and self.passed_h4

    def to_dict(self) -> dict:
        return {
            "theta_min": self.theta_min,
            "theta_max": self.theta_max,
            "trials": self.trials,
            "bound_h1": self.bound_h1,
            "bound_h3": self.bound_h3,
            "bound_h4": self.bound_h4,
            "h1_min_ratio": self.h1_min_ratio,
            "h3_max_deviation": self.h3_max_deviation,
            "h4_max_ratio": self.h4_max_ratio,
            "max_energy": self.max_energy,
            "max_energy_sqrt": math.sqrt(self.max_energy),
            "passed_h1": self.passed_h1,
            "passed_h3": self.passed_h3,
            "passed_h4": self.passed_h4,
            "all_passed": self.all_passed,
        }


def stability_check(
    mesh: Mesh,
    trials: int = 100,
    seed: int = 42,
    coeffs: DualCoefficients | None = None,
) -> StabilityReport:
    """Probe the three computable stability inequalities with random fluxes.

    For each trial the fluxes are i.i.d. standard normal.  The lower-bound
    pairing reduces to sum(c_a p_a^2) by the orthogonality of the dual
    basis; the squared field norm comes from the local mass matrices; the
    divergence-side quantities use the solved divergence profile of each
    triangle (its actual mean for the identity, its energy for the upper
    bound).
    """
    report = quality_report(mesh)
    if not report.admissible:
        raise ValueError("stability check requires an admissible mesh")
    coeffs = coeffs or cotan_coefficients(mesh, report)
    rng = np.random.default_rng(seed)

    grams = np.stack([local_gram_closed_form(mesh.geometry(t)) for t in range(mesh.num_triangles)])
    deltas = [solve_delta_k(mesh.geometry(t)) for t in range(mesh.num_triangles)]
    energies = np.array([d.energy for d in deltas])
    means = np.array([d.moments()[0] for d in deltas])
    areas = mesh.areas

    h1_min = math.inf
    h3_dev = 0.0
    h4_max = 0.0
    for _ in range(trials):
        p = rng.standard_normal(mesh.num_edges)
        loc = mesh.tri_signs * p[mesh.tri_edges]               # (nt, 3)
        pairing = float(coeffs.values @ p**2)
        norm2 = float(np.einsum("ti,tij,tj->", loc, grams, loc))
        h1_min = min(h1_min, pairing / norm2)
        div_weight = loc.sum(axis=1) ** 2 / areas              # per-cell |K| div^2
        div_norm2 = float(div_weight.sum())
        h3_dev = max(h3_dev, abs(float(div_weight @ means) / div_norm2 - 1.0))
        h4_max = max(h4_max, math.sqrt(float(div_weight @ energies) / div_norm2))

    theta_min, theta_max = report.theta_min, report.theta_max
    return StabilityReport(
        theta_min=theta_min,
        theta_max=theta_max,
        trials=trials,
        bound_h1=0.4 * math.tan(theta_min) / math.tan(theta_max),
        bound_h3=1.0,
        bound_h4=math.sqrt(nu_bound(theta_min)),
        h1_min_ratio=h1_min,
        h3_max_deviation=h3_dev,
        h4_max_ratio=h4_max,
        max_energy=float(energies.max()),
    )
