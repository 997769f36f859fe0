"""Cell-centered four-point finite volume discretization of the Poisson
problem on triangular meshes, with flux reconstruction in the lowest-order
H(div)-conforming space and a verification suite for the closed-form
geometric identities and stability constants behind the scheme.
"""

from .analysis import (
    CASES,
    ConvergenceReport,
    LemmaSuiteReport,
    ManufacturedCase,
    StabilityReport,
    convergence_study,
    error_norms,
    lemma_suite,
    stability_check,
)
from .dual import (
    DeltaK,
    DualCoefficients,
    cotan_coefficients,
    delta_energy_closed_form,
    g_eval,
    g_moments,
    nu_bound,
    solve_delta_k,
)
from .mesh import (
    Edge,
    Mesh,
    MeshError,
    MeshFormatError,
    MeshQualityReport,
    TriangleGeometry,
    build_mesh,
    generate_rhombus_equilateral,
    quality_report,
    read_mesh,
    triangle_geometry,
    write_mesh,
)
from .quadrature import (
    IntervalRule,
    TriangleRule,
    integrate_interval,
    integrate_triangle,
    interval_rule,
    triangle_rule,
)
from .solver import (
    ConvergenceError,
    DirichletData,
    FluxBalanceReport,
    Solution,
    SparseSystem,
    assemble,
    discrete_gradient,
    flux_balance_check,
    solve,
)
from .spaces import (
    P0Field,
    RTField,
    divergence,
    eval_local_basis,
    eval_rt_field,
    interpolate_p0,
    interpolate_rt,
    local_gram_closed_form,
    local_gram_quadrature,
)

__version__ = "0.1.0"
