"""linewatch: a desk-scale pipeline-integrity toolkit.

Provides
  1. Equations of state for pipeline liquids and light gases (``fluid``)
  2. Line geometry, instrumentation, and grid building (``network``)
  3. An implicit transient solver for 1D pipe flow with leak sinks
     (``hydraulics``)
  4. SCADA telemetry synthesis with noise, dropout, and plausibility
     filtering (``telemetry``)
  5. Real-time-model leak detection with voting, sizing, and
     localization (``rtm``)
  6. Windowed line-balance detection (``balance``)
  7. Negative-pressure-wave propagation and arrival-time localization
     (``acoustic``)
  8. Series-system alarm availability analysis (``availability``)
  9. Scenario configs, the end-to-end runner, and parameter sweeps
     (``scenario``; also the ``linewatch`` command line)

The demos/ directory of the source tree walks through each capability
with narrative scripts.
"""

from .acoustic import AcousticSensor, WaveModel, detection_latency, localize, propagate
from .availability import (
    ChainElement,
    ComponentChain,
    availability_report,
    chain_availability,
    compare_configurations,
    reference_chains,
)
from .balance import BalanceDetector, BalanceWindow, accumulate, balance_alarm
from .errors import (
    ConfigurationError,
    ConvergenceError,
    InfeasibleScenarioError,
    InfeasibleStateError,
    ParameterDomainError,
    SolverError,
)
from .fluid import (
    FluidModel,
    GasEos,
    LiquidEos,
    compressibility_z,
    density,
    isothermal_sound_speed,
    pressure_from_density,
)
from .hydraulics import (
    BoundaryConditions,
    BoundaryLeg,
    GridState,
    LeakEvent,
    PipeFlowSolver,
    SolverSettings,
    TimeSeries,
    linepack,
    modeled_profile,
    steady_state,
)
from .network import Grid, InstrumentPlacement, PipelineModel, Segment, discretize, elevation_at
from .rtm import Discrepancy, LeakVerdict, RtmDetector, VotingPolicy, vote
from .scenario import RunReport, Scenario, load_scenario, run_scenario, scenario_from_dict, sweep
from .telemetry import NoiseSpec, PlausibilityLimits, Reading, TelemetryFrame, plausibility_filter, sample

__version__ = "0.1.0"
