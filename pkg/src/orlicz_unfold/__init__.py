"""Periodic unfolding in Orlicz spaces on uniform midpoint grids."""

from ._validation import DomainError, ParseError, ShapeError
from .cells import (
    CellDecomposition,
    Domain,
    Grid,
    ReferenceCell,
    boundary_layer_measure,
    cell_index,
    decompose,
    lambda_vanishes,
    parse_cell,
    parse_domain,
)
from .expr import Expression, parse_expression
from .modular import SampledFunction, dual_pairing, luxemburg_norm, modular_value
from .nfunc import (
    Delta2Certificate,
    NFunction,
    check_delta2,
    check_nabla2,
    complementary,
    eval_B,
    exp_type,
    from_spec,
    power,
    power_log,
    tabulated,
)
from .study import (
    StudyConfig,
    StudyReport,
    emit_report,
    load_config,
    read_report,
    run_liminf_study,
    run_periodic_study,
    run_strong_study,
    run_study,
    run_uci_study,
    run_weak_study,
)
from .unfold import TwoScaleFunction, UnfoldedFunction, UnfoldingOperator, mean_Y, oscillate, unfold

__all__ = [name for name in dir() if not name.startswith("_")]
