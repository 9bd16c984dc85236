"""marq: workload transforms, moments and correlations for Markov-modulated
reflected autoregressive queues and related modulated recursions."""

from . import errors
from .chain import MarkovChain, chain_power, stationary_distribution
from .engine import (
    ExpScale,
    Scale,
    TransformResult,
    Translate,
    TruncationPolicy,
    derivative_series,
    iterate_fixed_point,
    product_tail,
)
from .lst import RationalLST
from .metrics import (
    autocorrelation_service,
    cross_correlation,
    cross_correlation_detail,
    fgm_truncation_counts,
)
from .model import (
    BME,
    CondIndep,
    DeterministicArrivals,
    ExponentialArrivals,
    ExponentialService,
    FGM,
    MixedErlangArrivals,
    MixedErlangService,
    ModelSpec,
    Autoregressive,
    RationalService,
    ServiceLinked,
    ShotNoise,
    WaitDependent,
    load_spec,
    require_valid,
    spec_from_json_dict,
    validate,
)
from .related import ShotNoiseSpec, WaitDepSpec, solve_shotnoise, solve_waitdep
from .stationary import (
    StationarySolution,
    mean_workload,
    solve_bme,
    solve_exponential,
    solve_fgm,
    solve_mixed_erlang,
)
from .sweep import SweepSpec, run_sweep, solve_auto
from .transient import (
    ModulatedArrivalSpec,
    ServiceLinkedTransientSolver,
    TransientQuery,
    TransientSolver,
    adjugate,
    eigen_mu,
    solve_transient,
    solve_transient_service_linked,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
