"""MGF parsing and spectrum preprocessing.

Turns raw MS/MS peak lists into sparse binned spectra: each surviving
peak becomes a (bin index, intensity level) pair ready for hypervector
encoding.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable

from .fileio import atomic_write_text

__all__ = [
    "Spectrum",
    "PreprocessConfig",
    "BinnedSpectrum",
    "MgfParseError",
    "EmptySpectrumError",
    "parse_mgf",
    "preprocess",
    "binned_to_json",
    "binned_from_json",
    "dump_binned_json",
    "load_binned_json",
]


class MgfParseError(ValueError):
    """Malformed MGF input; carries the 1-based line number."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class EmptySpectrumError(ValueError):
    """No peaks survive filtering; the caller may skip the spectrum."""


@dataclass
class Spectrum:
    """Raw spectrum: peak list plus precursor metadata.

    Peaks are (mz, intensity) pairs sorted ascending by mz.
    """

    id: str
    precursor_mz: float
    charge: int
    peaks: list[tuple[float, float]]


@dataclass(frozen=True)
class PreprocessConfig:
    """Peak filtering and quantization knobs.

    Defaults give one-Dalton-scale binning over the usual fragment range;
    all values are expected to come from the run configuration.
    """

    mz_min: float = 101.0
    mz_max: float = 1500.0
    bin_width: float = 1.0005079
    max_peaks: int = 50
    min_intensity_frac: float = 0.01
    intensity_levels: int = 64

    def __post_init__(self):
        if not self.mz_min < self.mz_max:
            raise ValueError(f"mz_min ({self.mz_min}) must be < mz_max ({self.mz_max})")
        if self.bin_width <= 0:
            raise ValueError(f"bin_width must be > 0, got {self.bin_width}")
        if self.max_peaks < 1:
            raise ValueError(f"max_peaks must be >= 1, got {self.max_peaks}")
        if not 0.0 <= self.min_intensity_frac <= 1.0:
            raise ValueError(f"min_intensity_frac must be in [0, 1], got {self.min_intensity_frac}")
        if self.intensity_levels < 2:
            raise ValueError(f"intensity_levels must be >= 2, got {self.intensity_levels}")

    @property
    def num_bins(self) -> int:
        return math.ceil((self.mz_max - self.mz_min) / self.bin_width)


@dataclass
class BinnedSpectrum:
    """Sparse binned spectrum: (bin index, level index) entries.

    Entries are unique and strictly increasing in bin index; every level
    index is below num_levels of the config that produced it.
    """

    id: str
    entries: list[tuple[int, int]]
    num_bins: int


# -------------------------------------------------------------- MGF parsing

def _parse_charge(text: str) -> int:
    """CHARGE value like '2+', '3-', or plain '2'."""
    text = text.strip()
    sign = -1 if text.endswith("-") else 1
    return sign * int(text.rstrip("+-"))


def parse_mgf(source: str | Path | IO) -> list[Spectrum]:
    """Parse an MGF file (path or open text/byte stream) into spectra.

    Unknown header lines are ignored.  Malformed blocks (missing END
    IONS, non-numeric peak values, negative intensities, empty peak
    lists) raise MgfParseError with the offending line number.  An empty
    file yields an empty list.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            return _parse_mgf_lines(fh)
    return _parse_mgf_lines(source)


def _parse_mgf_lines(lines: Iterable) -> list[Spectrum]:
    spectra: list[Spectrum] = []
    in_block = False
    begin_line = 0
    lineno = 0
    title = ""
    pepmass = 0.0
    charge = 0
    peaks: list[tuple[float, float]] = []

    for lineno, raw in enumerate(lines, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8", errors="replace")
        line = raw.strip()
        if not line or line.startswith("#"):
            continue

        if line == "BEGIN IONS":
            if in_block:
                raise MgfParseError(lineno, "BEGIN IONS inside an open block")
            in_block = True
            begin_line = lineno
            title = ""
            pepmass = 0.0
            charge = 0
            peaks = []
            continue

        if line == "END IONS":
            if not in_block:
                raise MgfParseError(lineno, "END IONS without BEGIN IONS")
            if not peaks:
                raise MgfParseError(lineno, "spectrum block has no peaks")
            in_block = False
            spectrum_id = title if title else f"spectrum-{len(spectra) + 1}"
            peaks.sort(key=lambda p: p[0])
            spectra.append(Spectrum(spectrum_id, pepmass, charge, peaks))
            continue

        if not in_block:
            continue  # stray text between blocks is ignored

        if "=" in line and not line[0].isdigit():
            key, _, value = line.partition("=")
            key = key.strip().upper()
            try:
                if key == "TITLE":
                    title = value.strip()
                elif key == "PEPMASS":
                    pepmass = float(value.split()[0])
                elif key == "CHARGE":
                    charge = _parse_charge(value)
            except (ValueError, IndexError):
                raise MgfParseError(lineno, f"bad {key} value: {value.strip()!r}") from None
            continue

        parts = line.split()
        if len(parts) < 2:
            raise MgfParseError(lineno, f"peak line needs mz and intensity: {line!r}")
        try:
            mz = float(parts[0])
            intensity = float(parts[1])
        except ValueError:
            raise MgfParseError(lineno, f"non-numeric peak values: {line!r}") from None
        if intensity < 0:
            raise MgfParseError(lineno, f"negative intensity: {line!r}")
        peaks.append((mz, intensity))

    if in_block:
        raise MgfParseError(begin_line, "BEGIN IONS without matching END IONS")
    return spectra


# ----------------------------------------------------------- preprocessing

def preprocess(s: Spectrum, cfg: PreprocessConfig) -> BinnedSpectrum:
    """Filter, quantize, and bin one spectrum.

    Steps: drop peaks outside [mz_min, mz_max); drop peaks below
    min_intensity_frac of the strongest remaining peak; keep at most
    max_peaks by intensity; square-root transform and normalize to the
    max retained value; map each peak to a bin and an intensity level.
    Colliding bins keep the higher level.
    """
    kept = [(mz, it) for mz, it in s.peaks if cfg.mz_min <= mz < cfg.mz_max]
    if kept:
        base = max(it for _, it in kept)
        kept = [(mz, it) for mz, it in kept if it >= cfg.min_intensity_frac * base]
    if kept and len(kept) > cfg.max_peaks:
        kept.sort(key=lambda p: (-p[1], p[0]))
        kept = kept[: cfg.max_peaks]
    if not kept:
        raise EmptySpectrumError(f"spectrum {s.id!r}: no peaks survive filtering")

    q = cfg.intensity_levels
    top = max(math.sqrt(it) for _, it in kept)
    levels: dict[int, int] = {}
    for mz, it in kept:
        # clamp guards float rounding for mz within an ulp of mz_max
        i = min(int((mz - cfg.mz_min) // cfg.bin_width), cfg.num_bins - 1)
        u = math.sqrt(it) / top if top > 0 else 0.0
        j = min(q - 1, int(u * q))
        if levels.get(i, -1) < j:
            levels[i] = j
    entries = sorted(levels.items())
    return BinnedSpectrum(s.id, entries, cfg.num_bins)


# -------------------------------------------------- binned JSON debug dump

def binned_to_json(spectra: list[BinnedSpectrum]) -> str:
    """JSON text for a list of binned spectra (one object per spectrum)."""
    objs = [
        {"id": b.id, "num_bins": b.num_bins, "entries": [[i, j] for i, j in b.entries]}
        for b in spectra
    ]
    return json.dumps(objs, indent=2, sort_keys=True) + "\n"


def binned_from_json(text: str) -> list[BinnedSpectrum]:
    objs = json.loads(text)
    out = []
    for obj in objs:
        entries = [(int(i), int(j)) for i, j in obj["entries"]]
        out.append(BinnedSpectrum(str(obj["id"]), entries, int(obj["num_bins"])))
    return out


def dump_binned_json(spectra: list[BinnedSpectrum], path: str | Path) -> None:
    atomic_write_text(path, binned_to_json(spectra))


def load_binned_json(path: str | Path) -> list[BinnedSpectrum]:
    return binned_from_json(Path(path).read_text(encoding="utf-8"))
