"""Reference models the conv net is compared against.

Two families: a generalized memory polynomial (GMP) identified by least
squares, and a set of fully connected networks (time-delay real-valued nets
over I/Q, with or without envelope features, and a deeper sigmoid variant)
trained with the shared Adam loop.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import Dataset
from .network import Activation, MlpLayer, mlp_forward, mlp_init
from .signals import ComplexSeq
from .training import AdamConfig, train_mlp_adam

__all__ = [
    "GmpFitError",
    "GmpConfig",
    "GmpModel",
    "gmp_table_config",
    "gmp_valid_indices",
    "gmp_basis_at",
    "gmp_basis",
    "gmp_fit_ls",
    "gmp_forward",
    "save_gmp",
    "load_gmp",
    "MLP_FEATURE_KINDS",
    "mlp_features_from_graphs",
    "MlpBaselineSpec",
    "MLP_BASELINES",
    "mlp_baseline_spec",
    "train_mlp_baseline",
    "mlp_baseline_nmse_db",
]


class GmpFitError(RuntimeError):
    """Raised when the least-squares identification cannot proceed."""


@dataclass(frozen=True)
class GmpConfig:
    """Term-index ranges for the three memory-polynomial blocks.

    Aligned block: x(n-l)|x(n-l)|^k, k in 0..ka-1, l in 0..la-1.
    Lagging block: x(n-l)|x(n-l-m)|^k, k in 1..kb, l in 0..lb-1, m in 1..mb.
    Leading block: x(n-l)|x(n-l+m)|^k, k in 1..kc, l in 0..lc-1, m in 1..mc.
    """

    ka: int = 0
    la: int = 0
    kb: int = 0
    lb: int = 0
    mb: int = 0
    kc: int = 0
    lc: int = 0
    mc: int = 0

    def __post_init__(self):
        for name in ("ka", "la", "kb", "lb", "mb", "kc", "lc", "mc"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {v!r}")
        if self.n_terms < 1:
            raise ValueError("config produces zero terms")

    @property
    def n_terms(self) -> int:
        """Number of complex coefficients."""
        return self.ka * self.la + self.kb * self.lb * self.mb + self.kc * self.lc * self.mc

    @property
    def max_past(self) -> int:
        """Largest past index n-d referenced by any term."""
        past = 0
        if self.ka * self.la:
            past = max(past, self.la - 1)
        if self.kb * self.lb * self.mb:
            past = max(past, self.lb - 1 + self.mb)
        if self.kc * self.lc * self.mc:
            past = max(past, self.lc - 1)
        return past

    @property
    def max_future(self) -> int:
        """Largest future index n+d referenced (leading envelopes only)."""
        if self.kc * self.lc * self.mc:
            return self.mc  # worst case l=0, m=mc
        return 0

    def to_dict(self) -> dict:
        return {k: int(getattr(self, k)) for k in ("ka", "la", "kb", "lb", "mb", "kc", "lc", "mc")}


def gmp_table_config() -> GmpConfig:
    """The comparison configuration: 77+30+0 = 107 complex terms."""
    return GmpConfig(ka=11, la=7, kb=3, lb=2, mb=5, kc=2, lc=0, mc=3)


@dataclass(frozen=True)
class GmpModel:
    config: GmpConfig
    coeffs: np.ndarray  # complex, (n_terms,)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128).reshape(-1)
        if c.size != self.config.n_terms:
            raise ValueError(f"expected {self.config.n_terms} coefficients, got {c.size}")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "coeffs", c)


def _column_specs(cfg: GmpConfig) -> list[tuple[int, int, int]]:
    """(signal delay l, envelope delay d, envelope order k) per column.

    Order is fixed: aligned, lagging, leading; within each block delay-major,
    then envelope shift, then order — so serialized coefficient vectors are
    unambiguous.
    """
    specs: list[tuple[int, int, int]] = []
    for l in range(cfg.la):
        for k in range(cfg.ka):
            specs.append((l, l, k))
    for l in range(cfg.lb):
        for m in range(1, cfg.mb + 1):
            for k in range(1, cfg.kb + 1):
                specs.append((l, l + m, k))
    for l in range(cfg.lc):
        for m in range(1, cfg.mc + 1):
            for k in range(1, cfg.kc + 1):
                specs.append((l, l - m, k))
    return specs


def gmp_valid_indices(cfg: GmpConfig, n_samples: int) -> np.ndarray:
    """All sample indices n whose every term stays inside the signal."""
    start = cfg.max_past
    stop = n_samples - cfg.max_future
    if stop <= start:
        raise ValueError(
            f"signal too short: {n_samples} samples cannot host delays up to "
            f"{cfg.max_past} past / {cfg.max_future} future"
        )
    return np.arange(start, stop)


def gmp_basis_at(x: ComplexSeq, cfg: GmpConfig, n_indices: np.ndarray) -> np.ndarray:
    """Basis rows evaluated at the given absolute sample indices."""
    n = np.asarray(n_indices, dtype=int).reshape(-1)
    if n.size == 0:
        raise ValueError("no sample indices given")
    if n.min() - cfg.max_past < 0 or n.max() + cfg.max_future >= len(x):
        raise ValueError("requested indices reach outside the signal for this config")
    data = x.data
    env = np.abs(data)
    cols = np.empty((n.size, cfg.n_terms), dtype=np.complex128)
    for j, (l, d, k) in enumerate(_column_specs(cfg)):
        cols[:, j] = data[n - l] * env[n - d] ** k
    return cols


def gmp_basis(x: ComplexSeq, cfg: GmpConfig) -> np.ndarray:
    """Basis over every valid sample (warm-up and look-ahead rows dropped)."""
    return gmp_basis_at(x, cfg, gmp_valid_indices(cfg, len(x)))


def gmp_fit_ls(basis: np.ndarray, y, ridge: float = 0.0, cfg: GmpConfig | None = None) -> GmpModel:
    """Least-squares coefficients, optionally ridge-regularized.

    With ridge = 0 a rank-deficient basis is an error (add ridge to proceed);
    with ridge > 0 the regularized normal equations are always solvable.
    """
    basis = np.asarray(basis, dtype=np.complex128)
    target = y.data if isinstance(y, ComplexSeq) else np.asarray(y, dtype=np.complex128).reshape(-1)
    if basis.ndim != 2:
        raise ValueError("basis must be a 2-D matrix")
    rows, cols = basis.shape
    if target.size != rows:
        raise ValueError(f"target length {target.size} does not match {rows} basis rows")
    if rows < cols:
        raise ValueError(f"underdetermined system: {rows} rows < {cols} columns")
    if ridge < 0:
        raise ValueError("ridge must be >= 0")

    if ridge == 0.0:
        coeffs, _, rank, _ = np.linalg.lstsq(basis, target, rcond=None)
        if rank < cols:
            raise GmpFitError(
                f"basis is rank-deficient ({rank} < {cols}); pass ridge > 0 to regularize"
            )
    else:
        gram = basis.conj().T @ basis + ridge * np.eye(cols)
        coeffs = np.linalg.solve(gram, basis.conj().T @ target)

    if cfg is None:
        cfg = _config_for_width(cols)
    return GmpModel(cfg, coeffs)


def _config_for_width(n_terms: int) -> GmpConfig:
    """Fallback aligned-only config used when fitting a bare matrix."""
    return GmpConfig(ka=n_terms, la=1)


def gmp_forward(model: GmpModel, x: ComplexSeq) -> ComplexSeq:
    """Model output over the valid rows of x (same trim as gmp_basis)."""
    out = gmp_basis(x, model.config) @ model.coeffs
    return ComplexSeq(out, x.sample_rate_hz)


def save_gmp(model: GmpModel, path) -> None:
    doc = {
        "config": model.config.to_dict(),
        "coeffs": [[float(c.real), float(c.imag)] for c in model.coeffs],
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_gmp(path) -> GmpModel:
    doc = json.loads(Path(path).read_text())
    cfg = GmpConfig(**{k: int(v) for k, v in doc["config"].items()})
    coeffs = np.array([complex(re, im) for re, im in doc["coeffs"]], dtype=np.complex128)
    return GmpModel(cfg, coeffs)


# --- fully connected baselines -------------------------------------------

MLP_FEATURE_KINDS = ("iq", "iq_env")


def mlp_features_from_graphs(graphs: np.ndarray, kind: str) -> np.ndarray:
    """Flatten feature graphs into MLP input rows.

    "iq" keeps only the I/Q rows (2(M+1) inputs); "iq_env" keeps all five
    rows (5(M+1) inputs). Row-major flattening, newest sample first within
    each row — the same layout the graphs themselves use.
    """
    graphs = np.asarray(graphs, dtype=float)
    if graphs.ndim != 3 or graphs.shape[1] != 5:
        raise ValueError(f"graphs must have shape (n, 5, M+1), got {graphs.shape}")
    if kind == "iq":
        return graphs[:, :2, :].reshape(graphs.shape[0], -1)
    if kind == "iq_env":
        return graphs.reshape(graphs.shape[0], -1)
    raise ValueError(f"unknown feature kind {kind!r}; expected one of {MLP_FEATURE_KINDS}")


@dataclass(frozen=True)
class MlpBaselineSpec:
    """A named fully connected baseline: feature layout plus layer widths."""

    name: str
    hidden_widths: tuple
    hidden_activation: str
    feature_kind: str

    def __post_init__(self):
        if self.feature_kind not in MLP_FEATURE_KINDS:
            raise ValueError(f"feature_kind must be one of {MLP_FEATURE_KINDS}")
        if not self.hidden_widths or any(w < 1 for w in self.hidden_widths):
            raise ValueError("hidden widths must be positive")

    def input_width(self, memory_depth: int) -> int:
        per_tap = 2 if self.feature_kind == "iq" else 5
        return per_tap * (memory_depth + 1)

    def widths(self, memory_depth: int) -> list[int]:
        return [self.input_width(memory_depth), *self.hidden_widths, 2]


MLP_BASELINES = {
    # I/Q-only time-delay net, one wide tanh hidden layer
    "rvtdnn": MlpBaselineSpec("rvtdnn", (35,), "tanh", "iq"),
    # augmented variant: adds the envelope-power rows to the input
    "arvtdnn": MlpBaselineSpec("arvtdnn", (17,), "tanh", "iq_env"),
    # deeper sigmoid net on I/Q only
    "dnn": MlpBaselineSpec("dnn", (17, 17, 17), "sigmoid", "iq"),
}


def mlp_baseline_spec(name: str) -> MlpBaselineSpec:
    try:
        return MLP_BASELINES[name]
    except KeyError:
        raise ValueError(
            f"unknown baseline {name!r}; expected one of {sorted(MLP_BASELINES)}"
        ) from None


def train_mlp_baseline(
    spec: MlpBaselineSpec,
    train: Dataset,
    cfg: AdamConfig,
    seed: int = 0,
) -> tuple[list[MlpLayer], np.ndarray]:
    """Adam-train a baseline on a dataset's graphs; returns (layers, history)."""
    feats = mlp_features_from_graphs(train.graphs, spec.feature_kind)
    layers = mlp_init(spec.widths(train.memory_depth), Activation(spec.hidden_activation), seed)
    return train_mlp_adam(layers, feats, train.labels, cfg)


def mlp_baseline_nmse_db(spec: MlpBaselineSpec, layers: list[MlpLayer], data: Dataset) -> float:
    """NMSE of a trained baseline on a dataset split."""
    from .metrics import nmse_db

    feats = mlp_features_from_graphs(data.graphs, spec.feature_kind)
    pred = mlp_forward(layers, feats)
    pred_c = pred[:, 0] + 1j * pred[:, 1]
    ref_c = data.labels[:, 0] + 1j * data.labels[:, 1]
    return nmse_db(pred_c, ref_c)
