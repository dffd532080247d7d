"""fabricsim: composable GPU fabric simulator and planning engine."""

from .composition import (DEFAULT_PROFILES, CompositionState,
                          ConstraintProfile, FabricComposer, PlanPolicy,
                          PlanRequest, ProfileSource)
from .enumeration import (AddressMap, BarPlacement, BridgeWindow,
                          EnumerationPolicy, assign_bus_numbers,
                          enumerate_host, min_addr_bits, render_lspci_tree)
from .errors import (BusNumberExhaustion, CompositionError, ExhaustionError,
                     FabricError, PathError, ScenarioError, TopologyError,
                     UnknownNodeError)
from .perf import (DEFAULT_EFFICIENCY, BandwidthEstimate, FeasibilityResult,
                   Path, ScalingModel, VramPool, fit_scaling, fits_in_pool,
                   p2p_bandwidth, p2p_path, predict_runtime, speedup,
                   vram_pool)
from .scenario import (BUILTIN_SCENARIOS, Measurements, ScenarioFile,
                       export_address_map, load_scenario, parse_scenario,
                       serialize_scenario)
from .topology import (GIB, KIB, MIB, TIB, FabricTopology, GpuEndpoint, Host,
                       Link, SwitchNode, Tier, ValidationReport, Violation,
                       make_switch, reference_topology, subtree_endpoints,
                       validate_topology)

__version__ = "0.1.0"
