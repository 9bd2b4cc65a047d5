"""Indirect-learning digital predistortion.

The postinverse network is trained on (PA output / linear gain) -> PA input
pairs, then copied unchanged in front of the PA. Predistorting the drive and
re-running the PA should collapse the spectral regrowth; the result object
reports ACPR before/after, the inverse-model accuracy, and the predistorted
peak (flagged, never clipped, when it exceeds the configured ceiling).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import dpd_dataset, feature_graphs
from .metrics import ChannelPlan, acpr_db, nmse_db, psd_welch
from .network import ConvNetArch, ConvNetParams, forward_batch, init_params
from .pa import ImpairmentConfig, PolyPaModel, transmit_chain
from .signals import ComplexSeq
from .training import AdamConfig, LmConfig, train_stage1_adam, train_stage2_lm

__all__ = [
    "PEAK_CEILING_DEFAULT",
    "DpdResult",
    "estimate_linear_gain",
    "train_dpd",
    "apply_dpd",
    "evaluate_linearization",
]

PEAK_CEILING_DEFAULT = 1.2


@dataclass(frozen=True)
class DpdResult:
    """Linearization outcome: spectra ratios plus inverse-model quality."""

    acpr_before_db: tuple
    acpr_after_db: tuple
    nmse_inverse_db: float
    gain_estimate: float
    predistorted_peak: float
    peak_ceiling: float = PEAK_CEILING_DEFAULT

    def __post_init__(self):
        if not self.gain_estimate > 0:
            raise ValueError("gain_estimate must be positive")

    @property
    def peak_exceeded(self) -> bool:
        return self.predistorted_peak > self.peak_ceiling

    @property
    def improvement_db(self) -> tuple:
        """Per-side ACPR drop (positive = linearization helped)."""
        return (
            self.acpr_before_db[0] - self.acpr_after_db[0],
            self.acpr_before_db[1] - self.acpr_after_db[1],
        )

    def to_dict(self) -> dict:
        return {
            "acpr_before_db": [float(v) for v in self.acpr_before_db],
            "acpr_after_db": [float(v) for v in self.acpr_after_db],
            "improvement_db": [float(v) for v in self.improvement_db],
            "nmse_inverse_db": float(self.nmse_inverse_db),
            "gain_estimate": float(self.gain_estimate),
            "predistorted_peak": float(self.predistorted_peak),
            "peak_ceiling": float(self.peak_ceiling),
            "peak_exceeded": bool(self.peak_exceeded),
        }


def estimate_linear_gain(x: ComplexSeq, y: ComplexSeq) -> float:
    """|g| of the least-squares scalar fit y ~ g*x."""
    if len(x) != len(y):
        raise ValueError("sequences must have equal length")
    xv, yv = x.data, y.data
    denom = float(np.vdot(xv, xv).real)
    if denom == 0.0:
        raise ValueError("cannot estimate gain from an all-zero input")
    g = np.vdot(xv, yv) / denom
    mag = float(np.abs(g))
    if mag == 0.0:
        raise ValueError("estimated gain is zero; output is orthogonal to input")
    return mag


def _complex_outputs(params: ConvNetParams, arch: ConvNetArch, graphs: np.ndarray) -> np.ndarray:
    out = forward_batch(params, arch, graphs)
    return out[:, 0] + 1j * out[:, 1]


def train_dpd(
    pa: PolyPaModel,
    drive: ComplexSeq,
    arch: ConvNetArch,
    adam_cfg: AdamConfig,
    lm_cfg: LmConfig,
    count: int,
    split_seed: int = 0,
    init_seed: int = 0,
    impairments: ImpairmentConfig | None = None,
) -> tuple[ConvNetParams, dict]:
    """Train the postinverse model on one transmit capture.

    Returns the trained parameters and a info dict with the gain estimate,
    the dataset normalization scale, held-out inverse NMSE, and both
    training histories. The parameters expect inputs scaled by info["scale"].
    """
    y = transmit_chain(pa, drive, impairments)
    gain = estimate_linear_gain(drive, y)
    train, test = dpd_dataset(y, drive, gain, arch.memory_depth, count, split_seed)

    params = init_params(arch, init_seed)
    params, hist1 = train_stage1_adam(params, arch, train, adam_cfg, test)
    params, lm_result = train_stage2_lm(params, arch, train, lm_cfg)

    pred = _complex_outputs(params, arch, test.graphs)
    ref = test.labels[:, 0] + 1j * test.labels[:, 1]
    info = {
        "gain_estimate": gain,
        "scale": train.scale,
        "nmse_inverse_db": nmse_db(pred, ref),
        "stage1_history": hist1,
        "lm_result": lm_result,
    }
    return params, info


def apply_dpd(
    params: ConvNetParams,
    arch: ConvNetArch,
    x: ComplexSeq,
    scale: float,
) -> ComplexSeq:
    """Predistort a drive signal with the trained inverse model.

    ``scale`` is the dataset normalization the model was trained under; the
    input is scaled into model units and the output scaled back. The first
    memory_depth samples have no full history and pass through unmodified.
    """
    if not scale > 0:
        raise ValueError("scale must be positive")
    m = arch.memory_depth
    if len(x) <= m:
        raise ValueError(f"signal needs more than {m} samples")
    z = x.scaled(scale)
    graphs = feature_graphs(z, m, len(x) - m, m)
    out = _complex_outputs(params, arch, graphs) / scale
    return x.with_data(np.concatenate([x.data[:m], out]))


def evaluate_linearization(
    pa: PolyPaModel,
    drive: ComplexSeq,
    params: ConvNetParams,
    arch: ConvNetArch,
    scale: float,
    plan: ChannelPlan,
    gain_estimate: float,
    nmse_inverse_db: float = float("nan"),
    impairments: ImpairmentConfig | None = None,
    segment: int = 1024,
    peak_ceiling: float = PEAK_CEILING_DEFAULT,
) -> tuple[DpdResult, dict]:
    """ACPR of the bare PA vs the predistorted cascade on the same drive.

    Returns the result plus a spectra dict (freqs and both PSDs) so callers
    can write plot-ready CSVs without recomputing.
    """
    y_before = transmit_chain(pa, drive, impairments)
    predistorted = apply_dpd(params, arch, drive, scale)
    y_after = transmit_chain(pa, predistorted, impairments)

    freqs, psd_before = psd_welch(y_before, segment)
    _, psd_after = psd_welch(y_after, segment)
    result = DpdResult(
        acpr_before_db=acpr_db(freqs, psd_before, plan),
        acpr_after_db=acpr_db(freqs, psd_after, plan),
        nmse_inverse_db=float(nmse_inverse_db),
        gain_estimate=float(gain_estimate),
        predistorted_peak=predistorted.peak(),
        peak_ceiling=peak_ceiling,
    )
    spectra = {
        "freqs_hz": freqs,
        "psd_before": psd_before,
        "psd_after": psd_after,
        "predistorted": predistorted,
        "output_before": y_before,
        "output_after": y_after,
    }
    return result, spectra
