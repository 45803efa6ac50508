"""Intensity correlation (HBT) histograms, fits and background correction.

``correlate`` is a full multi-stop correlator: every tag on channel A is
paired with every tag on channel B within the window, not just the nearest.
Bins are centered on tau = 0 and symmetric in count. The tie rule for
delays landing exactly on a bin edge is round-half-away-from-zero, which
keeps the histogram exactly mirror-symmetric under exchange of the inputs;
each bin is normalized by the exact number of integer tick delays it
covers, so a Poisson pair of streams averages to 1 in every bin including
the central one.

The dip model is

    g2(tau) = (N-1)/N + (1/N) * (1 - (1+a) e^(-|tau|/tau1) + a e^(-|tau|/tau2))

with N the number of identical emitters, ``a`` the amplitude of the
metastable-state bunching shoulder and tau1/tau2 the antibunching and
bunching time scales. At tau = 0 the model equals (N-1)/N identically.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import fitkit
from .errors import CorrectionWarning, DomainError
from .timetags import TimeTagStream

DEFAULT_BIN_WIDTH = 1e-9
DEFAULT_WINDOW = 250e-9
_A_CHUNK = 200_000  # bound the pair-array memory


@dataclass
class G2Histogram:
    """Normalized coincidence histogram.

    ``g2 = raw / normalizer`` per bin; ``sigma = sqrt(raw) / normalizer``.
    ``normalizer`` already accounts for the exact tick coverage of each bin,
    so an uncorrelated pair of streams has expectation 1 everywhere.
    """

    bin_width: float
    window: float
    tau: np.ndarray
    g2: np.ndarray
    sigma: np.ndarray
    raw: np.ndarray
    normalizer: np.ndarray
    rate_a: float
    rate_b: float
    total_time: float
    resolution: float
    flags: dict = field(default_factory=dict)

    def fit_sigma(self) -> np.ndarray:
        """Per-bin sigma with empty bins floored at one count."""
        return np.sqrt(np.maximum(self.raw, 1)) / self.normalizer


@dataclass
class G2Fit:
    """Fitted dip model parameters."""

    n_emitters: float
    a: float
    tau1: float
    tau2: float
    g2_zero: float
    g2_zero_sigma: float
    param_sigma: np.ndarray
    covariance: np.ndarray | None
    reduced_chi2: float
    converged: bool
    no_dip: bool
    message: str = ""


def g2_model(tau, n_emitters: float, a: float, tau1: float, tau2: float):
    """Dip model; written so g2(0) == (N-1)/N holds exactly in floats."""
    if tau1 <= 0.0 or tau2 <= 0.0 or n_emitters < 1.0:
        return np.full(np.shape(tau), np.inf)
    t = np.abs(np.asarray(tau, dtype=float))
    e1 = np.exp(-t / tau1)
    e2 = np.exp(-t / tau2)
    return (n_emitters - 1.0) / n_emitters + ((1.0 - e1) - a * (e1 - e2)) / n_emitters


def _bin_kernel(a_ticks, b_ticks, bin_ticks, m_bins):
    """Raw coincidence counts for delays b - a in bins -m..+m."""
    raw = np.zeros(2 * m_bins + 1, dtype=np.int64)
    reach = m_bins * bin_ticks + bin_ticks // 2
    two_b = 2 * bin_ticks
    for start in range(0, a_ticks.size, _A_CHUNK):
        a = a_ticks[start : start + _A_CHUNK]
        lo = np.searchsorted(b_ticks, a - reach, side="left")
        hi = np.searchsorted(b_ticks, a + reach, side="right")
        counts = hi - lo
        total = int(counts.sum())
        if total == 0:
            continue
        rep = np.repeat(np.arange(a.size), counts)
        cum = np.concatenate(([0], np.cumsum(counts[:-1])))
        seg = np.arange(total) - np.repeat(cum, counts) + np.repeat(lo, counts)
        d = b_ticks[seg] - a[rep]
        k = np.sign(d) * ((2 * np.abs(d) + bin_ticks) // two_b)
        k = k[np.abs(k) <= m_bins]
        raw += np.bincount((k + m_bins).astype(np.int64), minlength=2 * m_bins + 1)
    return raw


def _bin_coverage(bin_ticks: int, m_bins: int) -> np.ndarray:
    cov = np.full(2 * m_bins + 1, bin_ticks, dtype=np.int64)
    if bin_ticks % 2 == 0:
        cov[m_bins] = bin_ticks - 1  # central bin loses the half-edge ties
    return cov


def _histogram_frame(a: TimeTagStream, b: TimeTagStream, bin_width: float, window: float):
    """Validate inputs and compute the shared binning geometry."""
    if a.n_tags == 0 or b.n_tags == 0:
        raise DomainError("both channels must contain tags")
    if a.resolution != b.resolution:
        raise DomainError("streams have mismatched resolutions")
    res = a.resolution
    bin_ticks = int(round(bin_width / res))
    if bin_ticks < 1:
        raise DomainError(f"bin width {bin_width!r} s is below the tick resolution")
    snapped = bin_ticks * res
    m_bins = int(round(window / snapped))
    if m_bins < 1:
        raise DomainError(
            f"window {window!r} s is smaller than the bin width {snapped!r} s"
        )
    total_time = max(a.duration, b.duration)
    if total_time <= 0:
        raise DomainError("streams have zero duration")
    flags = {}
    if window > total_time:
        flags["window_exceeds_duration"] = True
    return res, bin_ticks, snapped, m_bins, total_time, flags


def _assemble(a, b, raw, res, bin_ticks, snapped, m_bins, window, total_time, flags):
    coverage = _bin_coverage(bin_ticks, m_bins)
    rate_a = a.n_tags / total_time
    rate_b = b.n_tags / total_time
    normalizer = rate_a * rate_b * (coverage * res) * total_time
    tau = (np.arange(-m_bins, m_bins + 1) * bin_ticks) * res
    return G2Histogram(
        bin_width=snapped,
        window=window,
        tau=tau,
        g2=raw / normalizer,
        sigma=np.sqrt(raw) / normalizer,
        raw=raw,
        normalizer=normalizer,
        rate_a=rate_a,
        rate_b=rate_b,
        total_time=total_time,
        resolution=res,
        flags=flags,
    )


def correlate(
    a: TimeTagStream,
    b: TimeTagStream,
    bin_width: float = DEFAULT_BIN_WIDTH,
    window: float = DEFAULT_WINDOW,
) -> G2Histogram:
    """Multi-stop cross-correlation of two channels.

    The normalizer ``rate_a * rate_b * bin_coverage * total_time`` makes an
    uncorrelated (Poisson) pair average to g2 = 1. A window longer than the
    acquisition is allowed but flagged ('window_exceeds_duration').
    """
    res, bin_ticks, snapped, m_bins, total_time, flags = _histogram_frame(
        a, b, bin_width, window
    )
    raw = _bin_kernel(a.timestamps, b.timestamps, bin_ticks, m_bins)
    return _assemble(a, b, raw, res, bin_ticks, snapped, m_bins, window, total_time, flags)


def correlate_chunked(
    a: TimeTagStream,
    b: TimeTagStream,
    bin_width: float = DEFAULT_BIN_WIDTH,
    window: float = DEFAULT_WINDOW,
    n_chunks: int = 1,
) -> G2Histogram:
    """Split channel A into chunks, correlate each against the window-padded
    slice of B, and sum the raw counts.

    Bin-for-bin identical to :func:`correlate`; exists so large streams can
    be processed in parallel or out of core.
    """
    if n_chunks < 1:
        raise DomainError(f"n_chunks must be at least 1, got {n_chunks}")
    res, bin_ticks, snapped, m_bins, total_time, flags = _histogram_frame(
        a, b, bin_width, window
    )
    reach = m_bins * bin_ticks + bin_ticks // 2
    raw = np.zeros(2 * m_bins + 1, dtype=np.int64)
    for a_part in np.array_split(a.timestamps, n_chunks):
        if a_part.size == 0:
            continue
        lo = np.searchsorted(b.timestamps, a_part[0] - reach, side="left")
        hi = np.searchsorted(b.timestamps, a_part[-1] + reach, side="right")
        raw += _bin_kernel(a_part, b.timestamps[lo:hi], bin_ticks, m_bins)
    return _assemble(a, b, raw, res, bin_ticks, snapped, m_bins, window, total_time, flags)


def _dip_half_width(tau: np.ndarray, g2: np.ndarray) -> float:
    """Crude tau1 seed: |tau| where the dip has recovered halfway to 1."""
    center = g2[np.argmin(np.abs(tau))]
    target = center + 0.5 * (1.0 - center)
    above = np.abs(tau)[g2 >= target]
    if above.size == 0 or center >= 1.0:
        return max(np.max(np.abs(tau)) / 10.0, np.min(np.abs(tau)[np.abs(tau) > 0], initial=1e-9))
    half = float(np.min(above[above > 0], initial=np.max(np.abs(tau)) / 10.0))
    return max(half / math.log(2.0), 1e-12)


def _bin_subsamples(hist: G2Histogram, n_sub: int = 8):
    """|tau| quadrature nodes spanning each bin's actual tick coverage.

    The data in a bin is the pair count averaged over the delays the bin
    covers, so the model must be averaged the same way or a steep dip
    biases the fit at coarse bin widths.
    """
    res = hist.resolution
    b = int(round(hist.bin_width / res))
    m = (hist.tau.size - 1) // 2
    k = np.abs(np.arange(-m, m + 1))
    if b % 2 == 0:
        lo = np.where(k == 0, 0.0, k * b - b / 2.0)
        hi = np.where(k == 0, b / 2.0 - 1.0, k * b + b / 2.0 - 1.0)
    else:
        lo = np.where(k == 0, 0.0, k * b - (b - 1) / 2.0)
        hi = k * b + (b - 1) / 2.0
    frac = (np.arange(n_sub) + 0.5) / n_sub
    return (lo[:, None] + (hi - lo)[:, None] * frac[None, :]) * res


def fit_g2(hist: G2Histogram, x0: np.ndarray | None = None) -> G2Fit:
    """Weighted fit of the dip model to a correlation histogram.

    The model is averaged over each bin's delay coverage (not sampled at
    the bin center), so wide bins do not bias g2(0) upward. Seeds: N from
    the central bins, ``a`` from the highest bin, tau1 from the dip
    half-width, tau2 = 10 tau1. Bounds keep N >= 1, a >= 0 and both time
    constants positive. ``no_dip`` is flagged when the weighted mean of
    the central bins is not significantly (3 sigma) below the weighted
    mean of the outer half of the window.
    """
    tau, y = hist.tau, hist.g2
    sigma = hist.fit_sigma()
    g_max = float(np.max(y))

    # dip significance: central 5 bins against the outer half-window
    def _weighted(mask):
        w = 1.0 / sigma[mask] ** 2
        return float(np.sum(w * y[mask]) / w.sum()), 1.0 / float(w.sum())

    center_mask = np.abs(tau) <= 2.5 * hist.bin_width
    tail_mask = np.abs(tau) >= hist.window / 2.0
    g_center, var_center = _weighted(center_mask)
    g_tail, var_tail = _weighted(tail_mask)
    depth = g_tail - g_center
    no_dip = depth < 3.0 * math.sqrt(var_center + var_tail)

    if x0 is None:
        # depth -> N through g2(0) = (N-1)/N; a shallow or absent dip
        # seeds a modest N and lets the optimizer drift up if needed
        n0 = 1.0 / max(depth, 1e-2)
        n0 = min(max(n0, 1.0), 100.0)
        a0 = max(g_max - 1.0, 0.0)
        tau1_0 = _dip_half_width(tau, y)
        x0 = np.array([n0, a0, tau1_0, 10.0 * tau1_0])
    scale = max(float(x0[2]), 1e-12)
    tau_sub = _bin_subsamples(hist)

    def residual(p):
        model = g2_model(tau_sub, p[0], p[1], p[2] * scale, p[3] * scale)
        return (np.mean(model, axis=1) - y) / sigma

    problem = fitkit.FitProblem(
        residual=residual,
        x0=np.array([x0[0], x0[1], x0[2] / scale, x0[3] / scale]),
        lower=np.array([1.0, 0.0, 1e-6, 1e-6]),
        upper=np.array([1e9, 1e6, 1e9, 1e9]),
    )
    outcome = fitkit.least_squares(problem)
    n_fit, a_fit = float(outcome.params[0]), float(outcome.params[1])
    tau1_fit = float(outcome.params[2]) * scale
    tau2_fit = float(outcome.params[3]) * scale

    unit = np.array([1.0, 1.0, scale, scale])
    cov = None if outcome.covariance is None else outcome.covariance * np.outer(unit, unit)
    sigmas = (
        np.full(4, np.nan) if cov is None else np.sqrt(np.clip(np.diag(cov), 0.0, None))
    )
    g2_zero = (n_fit - 1.0) / n_fit
    g2_zero_sigma = float(sigmas[0]) / n_fit**2 if np.isfinite(sigmas[0]) else float("nan")
    return G2Fit(
        n_emitters=n_fit,
        a=a_fit,
        tau1=tau1_fit,
        tau2=tau2_fit,
        g2_zero=g2_zero,
        g2_zero_sigma=g2_zero_sigma,
        param_sigma=sigmas,
        covariance=cov,
        reduced_chi2=outcome.reduced_chi2,
        converged=outcome.converged,
        no_dip=no_dip,
        message=outcome.message,
    )


def rho_from_rates(spot_rate: float, background_rate: float) -> float:
    """Signal fraction rho = (I - B) / I, clamped at 0 when B exceeds I."""
    if spot_rate <= 0:
        raise DomainError(f"spot_rate must be positive, got {spot_rate}")
    if background_rate < 0:
        raise DomainError(f"background_rate must be nonnegative, got {background_rate}")
    if background_rate > spot_rate:
        warnings.warn(
            "background exceeds spot rate; rho clamped to 0", CorrectionWarning
        )
        return 0.0
    return (spot_rate - background_rate) / spot_rate


def background_correct(
    g2, rho: float, sigma=None, rho_floor: float = 0.1
):
    """Remove uncorrelated background: g_corr = (g - (1 - rho^2)) / rho^2.

    Accepts a scalar, an array, or a :class:`G2Histogram` (returns the same
    kind). Sigmas scale by 1/rho^2. Values below zero after correction are
    possible with noisy data and set the 'below_zero' flag on a histogram;
    rho below ``rho_floor`` triggers a reliability warning.
    """
    if not 0.0 < rho <= 1.0:
        raise DomainError(f"rho must be in (0, 1], got {rho}")
    if rho < rho_floor:
        warnings.warn(
            f"rho = {rho:.3g} below {rho_floor:g}; corrected g2 is unreliable",
            CorrectionWarning,
        )
    rho2 = rho * rho
    if isinstance(g2, G2Histogram):
        corrected = (g2.g2 - (1.0 - rho2)) / rho2
        out = G2Histogram(
            bin_width=g2.bin_width,
            window=g2.window,
            tau=g2.tau.copy(),
            g2=corrected,
            sigma=g2.sigma / rho2,
            raw=g2.raw.copy(),
            normalizer=g2.normalizer * rho2,
            rate_a=g2.rate_a,
            rate_b=g2.rate_b,
            total_time=g2.total_time,
            resolution=g2.resolution,
            flags=dict(g2.flags),
        )
        out.flags["background_corrected"] = rho
        if np.any(corrected < 0):
            out.flags["below_zero"] = True
        return out
    value = (np.asarray(g2, dtype=float) - (1.0 - rho2)) / rho2
    value = float(value) if np.ndim(g2) == 0 else value
    if sigma is None:
        return value
    scaled = np.asarray(sigma, dtype=float) / rho2
    return value, (float(scaled) if np.ndim(sigma) == 0 else scaled)


def max_emitters_from_g2(g2_zero: float) -> int | None:
    """Largest emitter number consistent with g2(0) >= (N-1)/N.

    Returns None when g2_zero >= 1 (no bound). Negative g2_zero (possible
    after background correction of noisy data) still bounds N at 1.
    """
    if g2_zero >= 1.0:
        return None
    if g2_zero < 0.0:
        return 1
    bound = 1.0 / (1.0 - g2_zero)
    # exact integers allowed; otherwise floor (absorb float fuzz first)
    nearest = round(bound)
    if abs(bound - nearest) < 1e-9 and nearest >= 1:
        return int(nearest)
    return max(1, math.floor(bound))


def write_histogram_csv(hist: G2Histogram, path) -> None:
    """CSV rendering ``tau_ns,g2,sigma,raw`` with a metadata comment line."""
    with open(path, "w") as fh:
        fh.write(
            "# bin_width_ps={:.17g} window_ps={:.17g} rate_a_cps={:.17g} "
            "rate_b_cps={:.17g} total_time_s={:.17g} resolution_ps={:.17g}\n".format(
                hist.bin_width * 1e12,
                hist.window * 1e12,
                hist.rate_a,
                hist.rate_b,
                hist.total_time,
                hist.resolution * 1e12,
            )
        )
        fh.write("tau_ns,g2,sigma,raw\n")
        for t, g, s, r in zip(hist.tau, hist.g2, hist.sigma, hist.raw.tolist()):
            fh.write(f"{t * 1e9:.17g},{g:.17g},{s:.17g},{r}\n")


def read_histogram_csv(path) -> G2Histogram:
    """Read a histogram CSV written by :func:`write_histogram_csv`."""
    from .errors import FormatError

    meta: dict[str, float] = {}
    tau, g2, sigma, raw = [], [], [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        key, val = tok.split("=", 1)
                        meta[key] = float(val)
                continue
            if line == "tau_ns,g2,sigma,raw":
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise FormatError(f"expected 4 fields on line {lineno}", offset=lineno)
            tau.append(float(parts[0]) * 1e-9)
            g2.append(float(parts[1]))
            sigma.append(float(parts[2]))
            raw.append(int(parts[3]))
    required = {"bin_width_ps", "window_ps", "rate_a_cps", "rate_b_cps", "total_time_s", "resolution_ps"}
    if not required.issubset(meta):
        raise FormatError("histogram CSV is missing its metadata comment", offset=1)
    raw_arr = np.asarray(raw, dtype=np.int64)
    g2_arr = np.asarray(g2)
    sigma_arr = np.asarray(sigma)
    res = meta["resolution_ps"] * 1e-12
    bin_ticks = int(round(meta["bin_width_ps"] * 1e-12 / res))
    m_bins = (raw_arr.size - 1) // 2
    coverage = _bin_coverage(bin_ticks, m_bins)
    normalizer = (
        meta["rate_a_cps"] * meta["rate_b_cps"] * (coverage * res) * meta["total_time_s"]
    )
    return G2Histogram(
        bin_width=meta["bin_width_ps"] * 1e-12,
        window=meta["window_ps"] * 1e-12,
        tau=np.asarray(tau),
        g2=g2_arr,
        sigma=sigma_arr,
        raw=raw_arr,
        normalizer=normalizer,
        rate_a=meta["rate_a_cps"],
        rate_b=meta["rate_b_cps"],
        total_time=meta["total_time_s"],
        resolution=res,
        flags={},
    )
