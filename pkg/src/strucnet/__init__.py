"""Structural observability analysis and communication-topology design for
networked state estimators, with numeric gain synthesis and simulation."""

from .errors import (
    DimensionError,
    NoStabilizingGainFound,
    NotObservableError,
    ParseError,
    PlacementError,
    SRankDeficientError,
    StructuralError,
    StrucnetError,
)
from .patterns import SparsityPattern, stack_patterns
from .structure import (
    AgentClassification,
    AgentType,
    AgentVerdict,
    CoverFamily,
    CycleKind,
    ObservabilityReport,
    SccDecomposition,
    SccKind,
    SystemDigraph,
    YToppedPath,
    build_digraph,
    classify_agents,
    condition_i_check,
    generic_observability,
    maximal_cover,
    s_rank,
    scc_decompose,
    stack_agent_outputs,
)
from .fusion import (
    DistributedPattern,
    DistributedReport,
    FusionMode,
    TopologyDesign,
    build_dc,
    build_distributed,
    complete_topology,
    design_main,
    design_output_fusion,
    design_state_fusion_full_srank,
    identity_topology,
    kron_pattern,
    local_minimality_check,
    verify_distributed,
    verify_topology,
)
from .numerics import (
    GainMatrix,
    GainSearchConfig,
    GainSearchState,
    GainSynthesis,
    NumericSystem,
    SimulationTrace,
    error_dynamics,
    instantiate,
    numeric_dc,
    numeric_observability_rank,
    row_stochastic,
    simulate_nke,
    spectral_radius,
    synthesize_gain,
)
from .files import (
    NumericSpec,
    SystemDescription,
    load_gain,
    load_system,
    load_topology,
    realize,
    save_gain,
    save_topology,
    system_from_dict,
    system_to_dict,
    topology_from_dict,
    topology_to_dict,
)

__version__ = "0.1.0"
