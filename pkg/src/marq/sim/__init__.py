from .backend import ENV_VAR, active_backend, numba_available
from .oracle import (
    SimConfig,
    SimEstimate,
    StationarySimResult,
    exp_service_sampler,
    fgm_conditional_inverse,
    sample_fgm_pair,
    simulate_stationary,
    simulate_transient,
    simulate_transient_service_linked,
)
from .rng import Streams, stream_states

__all__ = [
    "ENV_VAR",
    "SimConfig",
    "SimEstimate",
    "StationarySimResult",
    "Streams",
    "active_backend",
    "exp_service_sampler",
    "fgm_conditional_inverse",
    "numba_available",
    "sample_fgm_pair",
    "simulate_stationary",
    "simulate_transient",
    "simulate_transient_service_linked",
    "stream_states",
]
