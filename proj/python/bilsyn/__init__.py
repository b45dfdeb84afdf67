from ._core import (
    BilinearSystem,
    CertificateError,
    Controller,
    Error,
    InfeasibleError,
    Problem,
    RegionSpec,
    SingularMatrixError,
    SynthesisResult,
    ValidationError,
    __version__,
    estimate_l2_gain,
    extract_controller,
    kron,
    load_controller,
    load_problem,
    max_feasible_region,
    minimize_gamma,
    parse_problem,
    region_at_level,
    report_json,
    simulate,
    sweep_gamma_vs_p,
    synthesize_performance,
    synthesize_stability,
    verify,
)

__all__ = [name for name in dir() if not name.startswith("_")]
