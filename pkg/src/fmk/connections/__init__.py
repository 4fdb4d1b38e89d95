"""Connections compatible with a multiplication, their duality and flatness."""

from .core import (
    FamilyComparison,
    SpecialFamily,
    compat_defect,
    compat_tensor,
    cov_endo,
    cov_vector,
    covariant_along,
    curvature,
    curvature_defect,
    family_equal,
    hessian_field,
    lorenz_defect,
    lorenz_tensor,
    nabla_mul,
    nabla_mul_apply,
    shift,
    torsion,
    torsion_defect,
    triple_product_tensor,
    unit_derivative_defect,
    unit_shift,
)
from .duality import (
    admissible_endomorphism,
    aux_identity_defect,
    aux_shift,
    connection_a,
    curvature_conjugation_defect,
    double_dual,
    dual_connection,
    duality_involution_defect,
    fixed_unit_dual,
    fixed_unit_involution_defect,
    involution_shift,
    second_structure,
    second_structure_euler_tensor,
    second_structure_involution_defect,
    second_structure_normalized,
    unit_normalized,
)
from .flatness import DualFlatReport, FlatShiftReport, dual_flat_defect, dual_flat_tensor, flat_shift_defect
from .legendre import (
    CommuteReport,
    commuting_shift,
    con_na,
    legendre_connection,
    legendre_curvature_defect,
    legendre_defect,
    legendre_duality_commute,
    legendre_tensor,
    legendre_transform,
)

__all__ = [name for name in dir() if not name.startswith("_")]
