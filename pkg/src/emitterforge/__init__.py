"""Simulation and analysis toolkit for counted-ion-implanted single-photon emitters.

The pipeline runs dose planning (implantation), defect-number statistics
(defectstats), photon time-tag simulation (photonsim), intensity
correlation (correlator) and spot/spectrum analysis (analysis), all on a
shared binary time-tag format (timetags). fitkit holds the bounded
Levenberg-Marquardt core the fitting routines share.
"""

from .analysis import (
    DebyeWallerResult,
    DecayFitResult,
    GaussianPeak,
    LineScanResult,
    SaturationFitResult,
    Spectrum,
    SpotMeasurement,
    calibrate_single_rate,
    count_emitters,
    debye_waller,
    fit_decay,
    fit_line_scan,
    fit_saturation,
    read_saturation_csv,
    read_spectrum_csv,
    read_spot_table,
    saturation_model,
    write_saturation_csv,
    write_spectrum_csv,
    write_spot_table,
)
from .correlator import (
    G2Fit,
    G2Histogram,
    background_correct,
    correlate,
    correlate_chunked,
    fit_g2,
    g2_model,
    max_emitters_from_g2,
    read_histogram_csv,
    rho_from_rates,
    write_histogram_csv,
)
from .defectstats import (
    CreationModel,
    DefectDistribution,
    composite_defect_pmf,
    composite_moments,
    composite_pmf_array,
    fit_mu,
    occurrence_histogram,
    poisson_pmf,
    sample_defect_count,
    wilson_interval,
)
from .errors import (
    ConfigError,
    CorrectionWarning,
    DomainError,
    FitkitWarning,
    FormatError,
    ZeroSignalWarning,
)
from .implantation import (
    BeamConfig,
    ImplantPattern,
    ImplantSite,
    StraggleParams,
    build_pattern,
    dwell_time_for_ions,
    expected_ions_through_hole,
    ions_per_spot,
    read_pattern_csv,
    sample_ion_counts,
    sample_ion_positions,
    write_pattern_csv,
)
from .photonsim import (
    BackgroundModel,
    DecayHistogram,
    DetectorModel,
    EmitterModel,
    read_decay_csv,
    run_detection,
    simulate_background_tags,
    simulate_emitter_tags,
    simulate_pulsed_decay,
    steady_state_rate,
    write_decay_csv,
)
from .timetags import (
    TimeTagStream,
    merge_streams,
    read_timetags,
    write_timetags,
)
from .units import parse_quantity

__version__ = "0.1.0"

__all__ = [
    "BackgroundModel",
    "BeamConfig",
    "ConfigError",
    "CorrectionWarning",
    "CreationModel",
    "DebyeWallerResult",
    "DecayFitResult",
    "DecayHistogram",
    "DefectDistribution",
    "DetectorModel",
    "DomainError",
    "EmitterModel",
    "FitkitWarning",
    "FormatError",
    "G2Fit",
    "G2Histogram",
    "GaussianPeak",
    "ImplantPattern",
    "ImplantSite",
    "LineScanResult",
    "SaturationFitResult",
    "Spectrum",
    "SpotMeasurement",
    "StraggleParams",
    "TimeTagStream",
    "ZeroSignalWarning",
    "background_correct",
    "build_pattern",
    "calibrate_single_rate",
    "composite_defect_pmf",
    "composite_moments",
    "composite_pmf_array",
    "correlate",
    "correlate_chunked",
    "count_emitters",
    "debye_waller",
    "dwell_time_for_ions",
    "expected_ions_through_hole",
    "fit_decay",
    "fit_g2",
    "fit_line_scan",
    "fit_mu",
    "fit_saturation",
    "g2_model",
    "ions_per_spot",
    "max_emitters_from_g2",
    "merge_streams",
    "occurrence_histogram",
    "parse_quantity",
    "poisson_pmf",
    "read_decay_csv",
    "read_histogram_csv",
    "read_pattern_csv",
    "read_saturation_csv",
    "read_spectrum_csv",
    "read_spot_table",
    "read_timetags",
    "rho_from_rates",
    "run_detection",
    "sample_defect_count",
    "sample_ion_counts",
    "sample_ion_positions",
    "saturation_model",
    "simulate_background_tags",
    "simulate_emitter_tags",
    "simulate_pulsed_decay",
    "steady_state_rate",
    "wilson_interval",
    "write_decay_csv",
    "write_histogram_csv",
    "write_pattern_csv",
    "write_saturation_csv",
    "write_spectrum_csv",
    "write_spot_table",
    "write_timetags",
]
