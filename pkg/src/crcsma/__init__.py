"""Cross-layer model of spectrum sensing and CSMA/CA backoff in cognitive radio networks."""

__version__ = "0.1.0"

from .chain import (  # noqa: E402
    CrossLayerChain,
    MacParams,
    SpectrumParams,
    StationaryDistribution,
    build_chain,
    perceived_busy_prob,
    solve_fixed_point,
    stationary_distribution,
)
from .detection import Fading, SensingParams, pd_awgn, pd_rayleigh, pf_awgn, pf_from_pd  # noqa: E402
from .metrics import Metrics, ThroughputMode, evaluate  # noqa: E402
from .simulator import BACKEND, SimConfig, SimStats, compare, simulate  # noqa: E402

__all__ = [
    "__version__",
    "BACKEND",
    "CrossLayerChain",
    "Fading",
    "MacParams",
    "Metrics",
    "SensingParams",
    "SimConfig",
    "SimStats",
    "SpectrumParams",
    "StationaryDistribution",
    "ThroughputMode",
    "build_chain",
    "compare",
    "evaluate",
    "pd_awgn",
    "pd_rayleigh",
    "perceived_busy_prob",
    "pf_awgn",
    "pf_from_pd",
    "simulate",
    "solve_fixed_point",
    "stationary_distribution",
]
