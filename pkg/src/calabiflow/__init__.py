"""Rotationally invariant Ricci flow on twisted projective bundles.

The metric is encoded by a single convex potential u(rho, t) on the real
line; the flow becomes a scalar parabolic equation for u, and the package
integrates it, monitors curvature and volume quantities along the way,
and analyzes the rescaled geometry near the singular time.
"""

from .blowup import (
    BlowupError,
    BlowupReport,
    BlowupRow,
    RegimeMismatchError,
    RescaledProfile,
    SolitonFit,
    blowup_report,
    blowup_window,
    fik_reference,
    gaussian_reference,
    infer_initial_class,
    rescale,
    self_similarity_distance,
    soliton_residual,
)
from .curvature import (
    CurvatureSample,
    RicciPotentialSample,
    bisectional_components,
    curvature_norm_proxy,
    curvature_sample,
    ricci_eigenvalues,
    ricci_potential,
    scalar_curvature,
    sigma_k,
)
from .diagnostics import (
    CheckpointRecord,
    DiagnosticsError,
    FlowTrace,
    MonitorSet,
    TraceRow,
    bisectional_min,
    c4_min_scaled,
    divisor_diameter,
    divisor_eigenvalue_scaled,
    export_trace,
    fs_slice_diameter,
    read_trace,
    regime_indicator,
    sample_row,
    sigma_bound_ratio,
    total_volume,
    trace_header,
    type_one_ratio,
    write_summary,
)
from .flow import (
    CT_VARIANTS,
    FlowError,
    FlowState,
    StepControl,
    StepStats,
    checkpoint_times,
    compute_ct,
    evolution_residuals,
    rhs,
    run,
    step,
)
from .moment import MomentDomainError, MomentProfile, c1_distance
from .profile import (
    CalabiProfile,
    FlowParams,
    KahlerClass,
    ProfileError,
    Regime,
    RhoGrid,
    SingularTimeInfo,
    TailFit,
    ValidationReport,
    Violation,
    build_canonical_profile,
    c4_combination,
    c4_trust_mask,
    class_at,
    differentiate,
    fit_boundary_tails,
    load_checkpoint,
    profile_from_samples,
    ratio_g,
    ratio_h,
    rescaled_copy,
    save_checkpoint,
    singular_time,
    to_moment_profile,
    validate_profile,
)

__version__ = "0.1.0"

__all__ = [
    "BlowupError",
    "BlowupReport",
    "BlowupRow",
    "CT_VARIANTS",
    "CalabiProfile",
    "CheckpointRecord",
    "CurvatureSample",
    "DiagnosticsError",
    "FlowError",
    "FlowParams",
    "FlowState",
    "FlowTrace",
    "KahlerClass",
    "MomentDomainError",
    "MomentProfile",
    "MonitorSet",
    "ProfileError",
    "Regime",
    "RegimeMismatchError",
    "RescaledProfile",
    "RhoGrid",
    "RicciPotentialSample",
    "SingularTimeInfo",
    "SolitonFit",
    "StepControl",
    "StepStats",
    "TailFit",
    "TraceRow",
    "ValidationReport",
    "Violation",
    "bisectional_components",
    "bisectional_min",
    "blowup_report",
    "blowup_window",
    "build_canonical_profile",
    "c1_distance",
    "c4_combination",
    "c4_min_scaled",
    "c4_trust_mask",
    "checkpoint_times",
    "class_at",
    "compute_ct",
    "curvature_norm_proxy",
    "curvature_sample",
    "differentiate",
    "divisor_diameter",
    "divisor_eigenvalue_scaled",
    "evolution_residuals",
    "export_trace",
    "fik_reference",
    "fit_boundary_tails",
    "fs_slice_diameter",
    "gaussian_reference",
    "infer_initial_class",
    "load_checkpoint",
    "profile_from_samples",
    "ratio_g",
    "ratio_h",
    "read_trace",
    "regime_indicator",
    "rescale",
    "rescaled_copy",
    "rhs",
    "ricci_eigenvalues",
    "ricci_potential",
    "run",
    "sample_row",
    "save_checkpoint",
    "scalar_curvature",
    "self_similarity_distance",
    "sigma_bound_ratio",
    "sigma_k",
    "singular_time",
    "soliton_residual",
    "step",
    "to_moment_profile",
    "total_volume",
    "trace_header",
    "type_one_ratio",
    "validate_profile",
    "write_summary",
]
