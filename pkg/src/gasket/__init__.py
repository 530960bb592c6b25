"""Numerical workbench for Dirichlet-form analysis on the Sierpinski gasket.

Modules:
    graph      level graphs, vertices, cells, words
    harmonic   harmonic extension matrices and word products
    kusuoka    cell measure weights and trace curves
    forms      energy form, energy measures, gradients, resistance
    spectral   eigenbasis, heat semigroup, resolvent, dual norms
    sobolev    measure specs, norms, inequality verification lab
    pde        time grids, convolution integrator, semilinear solver
    burgers    frozen-drift advective solver and maximum principle
    walk       killed random walk Monte Carlo estimators
    acceptance reference experiments with pass/fail verdicts
    cli        command-line entry point (``gasket``)
"""

from .errors import (
    ComputationError,
    GasketError,
    ResourceLimitError,
    UsageError,
)
from .graph import CONSTANTS, Constants, LevelGraph, Vertex, level_graph
from .forms import (
    CellField,
    DiscreteFunction,
    EnergyForm,
    cell_means,
    effective_resistance,
    energy,
    energy_bilinear,
    energy_measure_cells,
    gradient_cells,
    harmonic_extend,
    kusuoka_weights,
    reference_harmonic,
    resistance_table,
)
from .kusuoka import KusuokaWeights, TraceCurves, trace_curves
from .spectral import (
    SpectralDecomposition,
    decomposition,
    dual_norm,
    heat_apply,
    heat_apply_measure,
    heat_kernel,
    heat_kernel_diagonal,
    resolvent_kernel,
)
from .sobolev import (
    MeasureSpec,
    bump_function,
    build_corpus,
    check_measure_condition,
    estimate_optimal_exponent,
    exponent_formula,
    lp_norm,
    measure_dirac,
    measure_from_table,
    measure_mu,
    measure_nu,
    trace_limits,
    verify_inequality,
)
from .pde import (
    PDESolution,
    SourceFunction,
    TimeGrid,
    duhamel,
    energy_report,
    holder_report,
    solve_linear,
    solve_semilinear,
    uniform_grid,
)
from .burgers import (
    BurgersConfig,
    max_principle_report,
    solve_burgers,
)
from .walk import (
    PCAFWeights,
    WalkConfig,
    fk_heat,
    fk_source,
    pcaf_weights,
    qv_exponential_moment,
    simulate_killed_path,
)

__version__ = "0.1.0"
