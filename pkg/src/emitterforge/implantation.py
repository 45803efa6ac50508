"""Ion-dose planning and implantation geometry.

Covers the arithmetic between beam current, dwell time and ion number for a
focused beam, expected ion numbers through mask holes for broad-beam
implantation, stopping-position straggle sampling, and builders for the
standard site patterns (dose-ladder grid, mask-hole grid, alignment frame).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError, FormatError
from .units import ELEMENTARY_CHARGE, FWHM_PER_SIGMA

#: Per-row mean ion doses of the standard 15-row dose ladder (ions/spot).
FIB_ROW_DOSES = (6, 9, 13, 16, 25, 33, 45, 61, 83, 113, 153, 208, 283, 384, 500)

#: Mask hole diameter ladder in nm. The first 20 entries form the rows of
#: the standard 20x20 hole grid; the 2000 nm entry is the large reference
#: aperture and is not part of the grid.
MASK_HOLE_DIAMETERS_NM = (
    30, 35, 40, 45, 50, 55, 60, 65, 70, 75,
    80, 85, 90, 95, 100, 125, 150, 200, 300, 400, 2000,
)

PATTERN_KINDS = ("fib_grid", "mask_holes", "frame")


@dataclass
class BeamConfig:
    """Focused ion beam settings.

    current in ampere, charge_state in units of e (2 for doubly charged
    ions), fwhm the lateral beam profile full width at half maximum in m.
    """

    current: float
    charge_state: int = 1
    fwhm: float = 50e-9

    def __post_init__(self):
        if not (math.isfinite(self.current) and self.current > 0):
            raise DomainError(f"beam current must be positive, got {self.current}")
        if self.charge_state < 1 or int(self.charge_state) != self.charge_state:
            raise DomainError(f"charge_state must be a positive integer, got {self.charge_state}")
        if not (math.isfinite(self.fwhm) and self.fwhm > 0):
            raise DomainError(f"beam fwhm must be positive, got {self.fwhm}")
        self.charge_state = int(self.charge_state)

    @property
    def sigma(self) -> float:
        """Gaussian sigma of the beam profile."""
        return self.fwhm / FWHM_PER_SIGMA


@dataclass
class StraggleParams:
    """Stopping-position statistics of implanted ions (meters, 1 sigma)."""

    mean_depth: float = 60e-9
    sigma_lateral: float = 25e-9
    sigma_depth: float = 20e-9

    def __post_init__(self):
        if self.sigma_lateral < 0 or self.sigma_depth < 0:
            raise DomainError("straggle sigmas must be nonnegative")


@dataclass
class ImplantSite:
    """One implantation target: label, center position (m), mean ion number."""

    label: str
    x: float
    y: float
    expected_ions: float

    def __post_init__(self):
        if self.expected_ions < 0:
            raise DomainError(f"expected_ions must be nonnegative, got {self.expected_ions}")


@dataclass
class ImplantPattern:
    """A collection of implantation sites with shared straggle statistics."""

    kind: str
    sites: list[ImplantSite]
    straggle: StraggleParams = field(default_factory=StraggleParams)
    pitch: float = 10e-6

    def __post_init__(self):
        labels = [s.label for s in self.sites]
        if len(set(labels)) != len(labels):
            raise DomainError("site labels must be unique")

    def expected_ions(self) -> np.ndarray:
        return np.array([s.expected_ions for s in self.sites])


def ions_per_spot(beam: BeamConfig, dwell_time: float) -> float:
    """Mean number of ions delivered in one dwell: I * t / (q * e)."""
    if not math.isfinite(dwell_time) or dwell_time < 0:
        raise DomainError(f"dwell_time must be nonnegative, got {dwell_time}")
    return beam.current * dwell_time / (beam.charge_state * ELEMENTARY_CHARGE)


def dwell_time_for_ions(beam: BeamConfig, n_ions: float) -> float:
    """Dwell time that delivers ``n_ions`` on average (inverse of ions_per_spot)."""
    if not math.isfinite(n_ions) or n_ions < 0:
        raise DomainError(f"n_ions must be nonnegative, got {n_ions}")
    return n_ions * beam.charge_state * ELEMENTARY_CHARGE / beam.current


def expected_ions_through_hole(fluence_per_cm2: float, diameter: float) -> float:
    """Mean ion number through a circular mask hole.

    ``fluence_per_cm2`` is the areal dose in ions/cm^2 (the unit doses are
    universally quoted in); ``diameter`` is in meters.
    """
    if fluence_per_cm2 < 0:
        raise DomainError(f"fluence must be nonnegative, got {fluence_per_cm2}")
    if diameter < 0:
        raise DomainError(f"diameter must be nonnegative, got {diameter}")
    area_cm2 = math.pi * (diameter / 2.0) ** 2 * 1e4
    return fluence_per_cm2 * area_cm2


def sample_ion_counts(expected_ions, seed) -> np.ndarray:
    """Actual delivered ion numbers: Poisson around each site's mean dose."""
    expected = np.asarray(expected_ions, dtype=float)
    if np.any(expected < 0):
        raise DomainError("expected_ions must be nonnegative")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    # poisson() returns a bare int for scalar input; keep the array contract
    return np.asarray(rng.poisson(expected), dtype=np.int64)


def sample_ion_positions(
    site: ImplantSite,
    n_ions: int,
    beam_fwhm: float,
    straggle: StraggleParams,
    seed,
) -> np.ndarray:
    """Stopping positions of ``n_ions`` ions aimed at a site.

    Each lateral coordinate is the site center plus a Gaussian beam-pointing
    term (sigma = fwhm / 2.3548) plus a Gaussian straggle term; depth is
    Gaussian around the mean stopping depth. Returns an (n, 3) array of
    (x, y, depth) in meters.
    """
    if n_ions < 0:
        raise DomainError(f"n_ions must be nonnegative, got {n_ions}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    sigma_beam = beam_fwhm / FWHM_PER_SIGMA
    beam_xy = rng.normal(0.0, sigma_beam, size=(n_ions, 2)) if sigma_beam > 0 else 0.0
    straggle_xy = (
        rng.normal(0.0, straggle.sigma_lateral, size=(n_ions, 2))
        if straggle.sigma_lateral > 0
        else 0.0
    )
    depth = rng.normal(straggle.mean_depth, straggle.sigma_depth, size=n_ions)
    out = np.empty((n_ions, 3))
    out[:, 0] = site.x
    out[:, 1] = site.y
    out[:, :2] += beam_xy + straggle_xy
    out[:, 2] = depth
    return out


def _column_label(index: int) -> str:
    # chess-style file letters: A..Z then AA.. for very wide grids
    letters = ""
    index += 1
    while index > 0:
        index, rem = divmod(index - 1, 26)
        letters = chr(ord("A") + rem) + letters
    return letters


def build_pattern(
    kind: str,
    pitch: float = 10e-6,
    fluence_per_cm2: float | None = None,
    rows: int | None = None,
    straggle: StraggleParams | None = None,
    frame_size: float = 200e-6,
    frame_width: float = 2e-6,
) -> ImplantPattern:
    """Construct one of the standard site patterns.

    kind 'fib_grid': dose-ladder grid, one dose per row (FIB_ROW_DOSES),
    16 spots per row at the given pitch. Labels are chess-style
    (column letter + row number), e.g. 'I3'.

    kind 'mask_holes': 20x20 grid of mask holes, one diameter per row
    (first 20 entries of MASK_HOLE_DIAMETERS_NM); expected ions follow
    from the fluence and the hole area. ``fluence_per_cm2`` is required.

    kind 'frame': square outline of side ``frame_size`` made of
    ``frame_width`` cells, each receiving fluence * cell area ions.

    ``rows`` optionally truncates the grid to its first rows.
    """
    straggle = straggle or StraggleParams()
    if pitch <= 0:
        raise DomainError(f"pitch must be positive, got {pitch}")
    sites: list[ImplantSite] = []
    if kind == "fib_grid":
        doses = FIB_ROW_DOSES[: rows if rows is not None else len(FIB_ROW_DOSES)]
        if not doses:
            raise DomainError("rows must be at least 1")
        for r, dose in enumerate(doses):
            for c in range(16):
                sites.append(
                    ImplantSite(f"{_column_label(c)}{r + 1}", c * pitch, r * pitch, float(dose))
                )
    elif kind == "mask_holes":
        if fluence_per_cm2 is None:
            raise ConfigError("mask_holes pattern requires fluence_per_cm2", key="fluence_per_cm2")
        diameters = MASK_HOLE_DIAMETERS_NM[:20]
        diameters = diameters[: rows if rows is not None else len(diameters)]
        if not diameters:
            raise DomainError("rows must be at least 1")
        for r, d_nm in enumerate(diameters):
            expected = expected_ions_through_hole(fluence_per_cm2, d_nm * 1e-9)
            for c in range(20):
                sites.append(
                    ImplantSite(f"{_column_label(c)}{r + 1}", c * pitch, r * pitch, expected)
                )
    elif kind == "frame":
        if fluence_per_cm2 is None:
            raise ConfigError("frame pattern requires fluence_per_cm2", key="fluence_per_cm2")
        per_side = max(int(round(frame_size / frame_width)), 2)
        cell_ions = fluence_per_cm2 * (frame_width**2) * 1e4
        idx = 0
        for i in range(per_side):
            for j in range(per_side):
                on_border = i in (0, per_side - 1) or j in (0, per_side - 1)
                if not on_border:
                    continue
                idx += 1
                sites.append(
                    ImplantSite(f"F{idx:04d}", j * frame_width, i * frame_width, cell_ions)
                )
    else:
        raise ConfigError(f"unknown pattern kind {kind!r}", key="kind")
    return ImplantPattern(kind=kind, sites=sites, straggle=straggle, pitch=pitch)


def write_pattern_csv(pattern: ImplantPattern, path) -> None:
    """Write sites as ``label,x_um,y_um,expected_ions`` (numbers at 17 digits)."""
    with open(path, "w") as fh:
        fh.write(f"# kind={pattern.kind} pitch_um={pattern.pitch * 1e6:.17g}\n")
        fh.write("label,x_um,y_um,expected_ions\n")
        for s in pattern.sites:
            fh.write(f"{s.label},{s.x * 1e6:.17g},{s.y * 1e6:.17g},{s.expected_ions:.17g}\n")


def read_pattern_csv(path) -> ImplantPattern:
    """Read a pattern CSV written by :func:`write_pattern_csv`."""
    kind = "custom"
    pitch = 10e-6
    sites: list[ImplantSite] = []
    with open(path) as fh:
        lines = fh.readlines()
    lineno = 0
    for raw in lines:
        lineno += 1
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            for tok in line[1:].split():
                if tok.startswith("kind="):
                    kind = tok[5:]
                elif tok.startswith("pitch_um="):
                    pitch = float(tok[9:]) * 1e-6
            continue
        if line == "label,x_um,y_um,expected_ions":
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise FormatError(f"expected 4 fields on line {lineno}", offset=lineno)
        try:
            sites.append(
                ImplantSite(
                    parts[0],
                    float(parts[1]) * 1e-6,
                    float(parts[2]) * 1e-6,
                    float(parts[3]),
                )
            )
        except ValueError:
            raise FormatError(f"bad number on line {lineno}", offset=lineno) from None
    if not sites:
        raise FormatError("no sites in pattern file", offset=lineno)
    return ImplantPattern(kind=kind, sites=sites, pitch=pitch)
