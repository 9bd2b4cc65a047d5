"""Accuracy and spectral metrics: NMSE, Welch PSD, ACPR, AM/AM and AM/PM."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal as sp_signal

from .signals import ComplexSeq

__all__ = [
    "nmse_db",
    "psd_welch",
    "ChannelPlan",
    "band_power",
    "acpr_db",
    "am_characteristics",
    "MetricsReport",
    "write_spectrum_csv",
]

NMSE_FLOOR_DB = -300.0


def _as_complex_array(x) -> np.ndarray:
    if isinstance(x, ComplexSeq):
        return x.data
    return np.asarray(x, dtype=np.complex128).reshape(-1)


def nmse_db(pred, ref) -> float:
    """10*log10(sum|pred-ref|^2 / sum|ref|^2), floored at -300 dB."""
    p = _as_complex_array(pred)
    r = _as_complex_array(ref)
    if p.shape != r.shape:
        raise ValueError(f"prediction and reference lengths differ: {p.size} vs {r.size}")
    ref_energy = float(np.sum(np.abs(r) ** 2))
    if ref_energy == 0.0:
        raise ValueError("NMSE is undefined for an all-zero reference")
    err_energy = float(np.sum(np.abs(p - r) ** 2))
    if err_energy == 0.0:
        return NMSE_FLOOR_DB
    return max(float(10.0 * np.log10(err_energy / ref_energy)), NMSE_FLOOR_DB)


def psd_welch(x: ComplexSeq, segment: int = 1024, overlap_frac: float = 0.5):
    """Two-sided Welch PSD (Hann window, density scaling), fftshifted.

    Returns (freqs_hz, psd) with freqs ascending from -fs/2; integrating
    psd * df recovers the mean signal power (Parseval, within window bias).
    """
    if segment < 2:
        raise ValueError("segment must be >= 2")
    if len(x) < segment:
        raise ValueError(f"signal ({len(x)} samples) shorter than one segment ({segment})")
    if not 0.0 <= overlap_frac < 1.0:
        raise ValueError("overlap_frac must lie in [0, 1)")
    freqs, psd = sp_signal.welch(
        x.data,
        fs=x.sample_rate_hz,
        window="hann",
        nperseg=segment,
        noverlap=int(segment * overlap_frac),
        detrend=False,
        return_onesided=False,
        scaling="density",
    )
    return np.fft.fftshift(freqs), np.fft.fftshift(psd)


@dataclass(frozen=True)
class ChannelPlan:
    """Integration bands for ACPR: a main channel and two adjacent ones."""

    main_bw_hz: float
    adj_offset_hz: float
    adj_bw_hz: float
    center_hz: float = 0.0

    def __post_init__(self):
        if not self.main_bw_hz > 0 or not self.adj_bw_hz > 0:
            raise ValueError("channel bandwidths must be positive")
        if not self.adj_offset_hz > 0:
            raise ValueError("adjacent channel offset must be positive")
        if self.adj_offset_hz < (self.main_bw_hz + self.adj_bw_hz) / 2:
            warnings.warn(
                "adjacent band overlaps the main channel "
                f"(offset {self.adj_offset_hz:g} Hz < half the summed bandwidths)",
                stacklevel=2,
            )

    @classmethod
    def for_bandwidth(cls, main_bw_hz: float) -> "ChannelPlan":
        """Default plan: adjacent channels abut the main one (offset = bw)."""
        return cls(main_bw_hz, main_bw_hz, main_bw_hz)


def band_power(freqs: np.ndarray, psd: np.ndarray, lo_hz: float, hi_hz: float) -> float:
    """Integrated PSD over [lo, hi); band must sit inside the sampled span."""
    freqs = np.asarray(freqs)
    psd = np.asarray(psd)
    if lo_hz >= hi_hz:
        raise ValueError("band edges must satisfy lo < hi")
    df = freqs[1] - freqs[0]
    if lo_hz < freqs[0] - df / 2 or hi_hz > freqs[-1] + df / 2:
        raise ValueError(
            f"band [{lo_hz:g}, {hi_hz:g}) Hz falls outside the sampled span "
            f"[{freqs[0]:g}, {freqs[-1]:g}] Hz"
        )
    mask = (freqs >= lo_hz) & (freqs < hi_hz)
    if not mask.any():
        raise ValueError("band contains no PSD bins")
    return float(psd[mask].sum() * df)


def acpr_db(freqs: np.ndarray, psd: np.ndarray, plan: ChannelPlan) -> tuple[float, float]:
    """Adjacent-to-main power ratio in dB, (lower side, upper side)."""
    c = plan.center_hz
    main = band_power(freqs, psd, c - plan.main_bw_hz / 2, c + plan.main_bw_hz / 2)
    if main <= 0.0:
        raise ValueError("main channel contains no power")
    lo = band_power(
        freqs, psd, c - plan.adj_offset_hz - plan.adj_bw_hz / 2, c - plan.adj_offset_hz + plan.adj_bw_hz / 2
    )
    hi = band_power(
        freqs, psd, c + plan.adj_offset_hz - plan.adj_bw_hz / 2, c + plan.adj_offset_hz + plan.adj_bw_hz / 2
    )
    return (float(10.0 * np.log10(lo / main)), float(10.0 * np.log10(hi / main)))


def am_characteristics(x: ComplexSeq, y: ComplexSeq, min_amplitude: float = 1e-6):
    """Per-sample AM/AM and AM/PM scatter.

    Returns (input_amplitude, gain_db, phase_shift_deg) arrays over the
    samples whose input amplitude exceeds ``min_amplitude``.
    """
    if len(x) != len(y):
        raise ValueError("input and output lengths differ")
    ax = np.abs(x.data)
    keep = ax > min_amplitude
    ratio = y.data[keep] / x.data[keep]
    gain_db = 20.0 * np.log10(np.abs(ratio))
    phase_deg = np.degrees(np.angle(ratio))
    return ax[keep], gain_db, phase_deg


@dataclass(frozen=True)
class MetricsReport:
    """Headline numbers for one modeling or DPD run."""

    nmse_db: float
    acpr_lower_db: float
    acpr_upper_db: float
    papr_db: float
    coeff_count: int
    flops: int

    def to_dict(self) -> dict:
        return {
            "nmse_db": float(self.nmse_db),
            "acpr_lower_db": float(self.acpr_lower_db),
            "acpr_upper_db": float(self.acpr_upper_db),
            "papr_db": float(self.papr_db),
            "coeff_count": int(self.coeff_count),
            "flops": int(self.flops),
        }


def write_spectrum_csv(freqs: np.ndarray, psd: np.ndarray, path, comment: str | None = None) -> None:
    """freq_hz,psd_db rows (psd floored at 1e-30 before the log)."""
    lines = []
    if comment:
        lines.append(f"# {comment}")
    lines.append("freq_hz,psd_db")
    psd_db = 10.0 * np.log10(np.maximum(np.asarray(psd, dtype=float), 1e-30))
    for f, p in zip(np.asarray(freqs, dtype=float), psd_db):
        lines.append(f"{float(f)!r},{float(p)!r}")
    Path(path).write_text("\n".join(lines) + "\n")
