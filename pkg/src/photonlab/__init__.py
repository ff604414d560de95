"""photonlab: deterministic Monte Carlo photon streams, detector models and
g2(tau) correlation analysis."""

__version__ = "0.1.0"

from photonlab.core import (  # noqa: F401
    ClickStream,
    PhotonStream,
    RngSeed,
    merge_streams,
    ns_to_ticks,
    seconds_to_ticks,
    validate_stream,
)
from photonlab.emitters import (  # noqa: F401
    FockModeSpec,
    G2Model,
    ThreeLevelParams,
    analytic_g2,
    eval_g2,
    simulate_fock_modes,
    simulate_poisson,
    simulate_three_level,
)
from photonlab.detectors import (  # noqa: F401
    DetectorParams,
    PRESETS,
    apply_dead_time,
    beam_splitter,
    detect,
    validate_clicks,
)
from photonlab.correlation import (  # noqa: F401
    CorrelationHistogram,
    G2Curve,
    correlate_all_pairs,
    correlate_cross,
    fold_two_sided,
    merge_histograms,
    normalize_g2,
    start_stop_first,
)
from photonlab.fitting import FitResult, fit_g2, fit_linear  # noqa: F401
