"""Coverage- and collinearity-controlled multi-slot pilot patterns."""

__version__ = "0.1.0"

from .patterns import (  # noqa: E402
    GridDims,
    PilotPattern,
    baseline_3gpp,
    baseline_chirp,
    baseline_random,
    cyclic_shift,
    read_pattern,
    validate,
    write_pattern,
)
from .geometry import (  # noqa: E402
    coherence_map,
    collinearity_census,
    coverage,
    enumerate_modular_lines,
    kernel_peak,
    legacy_kernel,
    metric_cost,
    symmetric_triples,
)
from .solver import SolverConfig, SolveResult, min_covering_radius, solve_mcc, tighten_budget  # noqa: E402
from .lpformat import export_lp  # noqa: E402
from .channel import DDChannel, ObservationWindow, SimConfig, build_dictionaries, observe, sample_channel  # noqa: E402
from .recovery import (  # noqa: E402
    RecoveryConfig,
    RecoveryResult,
    fista,
    lambda_rule,
    nmse,
    reconstruct_latest,
    recover,
    refine,
)
