"""Config-driven experiment pipelines shared by the CLI and the tests.

One config object describes the whole chain — OFDM drive, synthetic PA,
front-end impairment case, model family, training settings — and hashes to
a short id that is stamped into every output file. Pipelines are strictly
seeded, so rerunning a config reproduces its outputs byte for byte.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .baselines import (
    GmpConfig,
    gmp_basis_at,
    gmp_fit_ls,
    gmp_table_config,
    mlp_baseline_nmse_db,
    mlp_baseline_spec,
    mlp_features_from_graphs,
    save_gmp,
    train_mlp_baseline,
)
from .complexity import (
    conv_net_coeff_count,
    conv_net_flops,
    gmp_coeff_count,
    gmp_flops,
    mlp_coeff_count,
    mlp_flops,
)
from .dataset import build_dataset, feature_graphs, split_indices
from .dpd import evaluate_linearization, train_dpd
from .metrics import ChannelPlan, acpr_db, nmse_db, psd_welch, write_spectrum_csv
from .network import (
    Activation,
    ConvNetArch,
    forward_batch,
    init_params,
    load_params,
    mlp_forward,
    save_params,
)
from .pa import ImpairmentConfig, default_pa, transmit_chain
from .signals import ComplexSeq, OfdmConfig, generate_ofdm, papr_db
from .training import (
    AdamConfig,
    LmConfig,
    train_stage1_adam,
    train_stage2_lm,
    write_history_csv,
)

__all__ = [
    "SCHEMA_VERSION",
    "StageError",
    "ExperimentConfig",
    "experiment_config_from_dict",
    "config_hash",
    "run_experiment",
    "run_dpd_experiment",
    "sweep_memory",
]

SCHEMA_VERSION = 1

MODEL_KINDS = ("conv_net", "gmp", "rvtdnn", "arvtdnn", "dnn")


class StageError(RuntimeError):
    """A pipeline failure tagged with the stage that raised it."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class ExperimentConfig:
    signal: OfdmConfig = OfdmConfig()
    pa_seed: int = 0
    pa_k_order: int = 5
    pa_q_depth: int = 4
    impairment_case: int = 1
    model: str = "conv_net"
    arch: ConvNetArch = ConvNetArch()
    adam: AdamConfig = AdamConfig(max_iters=10000)
    lm: LmConfig = LmConfig()
    gmp: GmpConfig = gmp_table_config()
    dataset_count: int = 14000
    split_seed: int = 0
    init_seed: int = 0
    ridge: float = 0.0
    drive_backoff_db: float = 3.0
    segment: int = 1024
    reuse_filter_from: str | None = None

    def __post_init__(self):
        if self.model not in MODEL_KINDS:
            raise ValueError(f"model must be one of {MODEL_KINDS}, got {self.model!r}")
        if self.impairment_case not in (1, 2, 3):
            raise ValueError("impairment_case must be 1, 2, or 3")
        if self.dataset_count < 10:
            raise ValueError("dataset_count must be at least 10")
        if self.drive_backoff_db < 0:
            raise ValueError("drive_backoff_db must be >= 0")

    def to_dict(self) -> dict:
        sig = self.signal
        arch = self.arch
        adam = self.adam
        lm = self.lm
        return {
            "signal": {
                "n_subcarriers": sig.n_subcarriers,
                "qam_order": sig.qam_order,
                "n_symbols": sig.n_symbols,
                "oversampling": sig.oversampling,
                "rolloff": sig.rolloff,
                "seed": sig.seed,
                "sample_rate_hz": sig.sample_rate_hz,
            },
            "pa_seed": self.pa_seed,
            "pa_k_order": self.pa_k_order,
            "pa_q_depth": self.pa_q_depth,
            "impairment_case": self.impairment_case,
            "model": self.model,
            "arch": {
                "memory_depth": arch.memory_depth,
                "n_kernels": arch.n_kernels,
                "kernel_rows": arch.kernel_rows,
                "kernel_cols": arch.kernel_cols,
                "kernel_depth": arch.kernel_depth,
                "fc_neurons": arch.fc_neurons,
                "conv_activation": arch.conv_activation.kind,
                "fc_activation": arch.fc_activation.kind,
            },
            "adam": {
                "learning_rate": adam.learning_rate,
                "beta1": adam.beta1,
                "beta2": adam.beta2,
                "epsilon": adam.epsilon,
                "max_iters": adam.max_iters,
                "mse_threshold": adam.mse_threshold,
            },
            "lm": {
                "mu_init": lm.mu_init,
                "mu_up": lm.mu_up,
                "mu_down": lm.mu_down,
                "max_iters": lm.max_iters,
                "grad_tol": lm.grad_tol,
                "mu_max": lm.mu_max,
                "min_rel_improvement": lm.min_rel_improvement,
            },
            "gmp": self.gmp.to_dict(),
            "dataset_count": self.dataset_count,
            "split_seed": self.split_seed,
            "init_seed": self.init_seed,
            "ridge": self.ridge,
            "drive_backoff_db": self.drive_backoff_db,
            "segment": self.segment,
            "reuse_filter_from": self.reuse_filter_from,
        }


def experiment_config_from_dict(doc: dict) -> ExperimentConfig:
    """Build a config from a (possibly partial) plain dict."""
    base = ExperimentConfig().to_dict()
    known = set(base)
    unknown = set(doc) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    merged = dict(base)
    for key, val in doc.items():
        if isinstance(base[key], dict):
            sub = dict(base[key])
            extra = set(val) - set(sub)
            if extra:
                raise ValueError(f"unknown keys under {key!r}: {sorted(extra)}")
            sub.update(val)
            merged[key] = sub
        else:
            merged[key] = val

    arch_doc = dict(merged["arch"])
    arch = ConvNetArch(
        memory_depth=int(arch_doc["memory_depth"]),
        n_kernels=int(arch_doc["n_kernels"]),
        kernel_rows=int(arch_doc["kernel_rows"]),
        kernel_cols=int(arch_doc["kernel_cols"]),
        kernel_depth=int(arch_doc["kernel_depth"]),
        fc_neurons=int(arch_doc["fc_neurons"]),
        conv_activation=Activation(arch_doc["conv_activation"]),
        fc_activation=Activation(arch_doc["fc_activation"]),
    )
    return ExperimentConfig(
        signal=OfdmConfig(**merged["signal"]),
        pa_seed=int(merged["pa_seed"]),
        pa_k_order=int(merged["pa_k_order"]),
        pa_q_depth=int(merged["pa_q_depth"]),
        impairment_case=int(merged["impairment_case"]),
        model=str(merged["model"]),
        arch=arch,
        adam=AdamConfig(**merged["adam"]),
        lm=LmConfig(**merged["lm"]),
        gmp=GmpConfig(**merged["gmp"]),
        dataset_count=int(merged["dataset_count"]),
        split_seed=int(merged["split_seed"]),
        init_seed=int(merged["init_seed"]),
        ridge=float(merged["ridge"]),
        drive_backoff_db=float(merged["drive_backoff_db"]),
        segment=int(merged["segment"]),
        reuse_filter_from=merged["reuse_filter_from"],
    )


def config_hash(cfg: ExperimentConfig) -> str:
    """Short stable id of the full config (sha256 prefix)."""
    canon = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _run_stage(stage: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(stage, exc) from exc


def _impairments(cfg: ExperimentConfig) -> ImpairmentConfig:
    return ImpairmentConfig.case(cfg.impairment_case)


def _complex(rows: np.ndarray) -> np.ndarray:
    return rows[:, 0] + 1j * rows[:, 1]


def _channel_plan(cfg: ExperimentConfig) -> ChannelPlan:
    return ChannelPlan.for_bandwidth(cfg.signal.occupied_bandwidth_hz)


def _train_conv_net(cfg: ExperimentConfig, train, test):
    params = init_params(cfg.arch, cfg.init_seed)
    if cfg.reuse_filter_from:
        loaded, loaded_arch = load_params(cfg.reuse_filter_from)
        if (loaded_arch.memory_depth, loaded_arch.n_kernels, loaded_arch.kernel_rows,
                loaded_arch.kernel_cols) != (cfg.arch.memory_depth, cfg.arch.n_kernels,
                                             cfg.arch.kernel_rows, cfg.arch.kernel_cols):
            raise ValueError("saved filter does not match the configured architecture")
        params = replace(params, conv_kernels=loaded.conv_kernels.copy(),
                         conv_biases=loaded.conv_biases.copy())
        hist1 = np.zeros((0, 3))
    else:
        params, hist1 = train_stage1_adam(params, cfg.arch, train, cfg.adam, test)
    params, lm_result = train_stage2_lm(params, cfg.arch, train, cfg.lm)
    return params, hist1, lm_result


def run_experiment(cfg: ExperimentConfig, output_dir=None) -> dict:
    """Forward-modeling pipeline; returns (and optionally writes) the report."""
    chash = config_hash(cfg)

    x = _run_stage("signal", generate_ofdm, cfg.signal)
    pa = _run_stage("pa", default_pa, cfg.pa_seed, cfg.pa_k_order, cfg.pa_q_depth)
    imp = _run_stage("impairment", _impairments, cfg)
    y = _run_stage("transmit", transmit_chain, pa, x, imp)
    m = cfg.arch.memory_depth
    train, test = _run_stage(
        "dataset", build_dataset, x, y, m, cfg.dataset_count, cfg.split_seed
    )

    results: dict = {
        "model": cfg.model,
        "papr_db": float(papr_db(x)),
        "scale": float(train.scale),
        "n_train": len(train),
        "n_test": len(test),
    }
    xs = x.scaled(train.scale)
    ys = y.data * train.scale
    n_idx = m + np.arange(cfg.dataset_count)
    ref_ordered = ys[n_idx]
    hist1 = lm_result = None
    conv_params = None

    if cfg.model == "conv_net":
        conv_params, hist1, lm_result = _run_stage("train", _train_conv_net, cfg, train, test)
        pred_train = _complex(forward_batch(conv_params, cfg.arch, train.graphs))
        pred_test = _complex(forward_batch(conv_params, cfg.arch, test.graphs))
        ordered = feature_graphs(xs, m, cfg.dataset_count, m)
        pred_ordered = _complex(forward_batch(conv_params, cfg.arch, ordered))
        results.update(
            coeff_count=conv_net_coeff_count(cfg.arch),
            flops=conv_net_flops(cfg.arch),
            stage1={
                "iters": int(hist1.shape[0]),
                "final_mse": float(hist1[-1, 1]) if hist1.size else None,
            },
            stage2={
                "iters": lm_result.n_iters,
                "converged": bool(lm_result.converged),
                "reason": lm_result.reason,
                "final_mse": float(lm_result.history[lm_result.history[:, 3] > 0][-1, 1])
                if lm_result.history.size
                else None,
            },
        )
    elif cfg.model == "gmp":
        def fit_gmp():
            tr_rel, te_rel = split_indices(cfg.dataset_count, cfg.split_seed)
            lo, hi = cfg.gmp.max_past, cfg.dataset_count + m - cfg.gmp.max_future
            tr_abs = tr_rel + m
            te_abs = te_rel + m
            tr_abs = tr_abs[(tr_abs >= lo) & (tr_abs < hi)]
            te_abs = te_abs[(te_abs >= lo) & (te_abs < hi)]
            basis_tr = gmp_basis_at(xs, cfg.gmp, tr_abs)
            model = gmp_fit_ls(basis_tr, ys[tr_abs], cfg.ridge, cfg.gmp)
            return model, tr_abs, te_abs

        model, tr_abs, te_abs = _run_stage("train", fit_gmp)
        pred_train = gmp_basis_at(xs, cfg.gmp, tr_abs) @ model.coeffs
        pred_test = gmp_basis_at(xs, cfg.gmp, te_abs) @ model.coeffs
        valid = n_idx[(n_idx >= cfg.gmp.max_past) & (n_idx < len(xs) - cfg.gmp.max_future)]
        pred_ordered = gmp_basis_at(xs, cfg.gmp, valid) @ model.coeffs
        ref_ordered = ys[valid]
        results.update(coeff_count=gmp_coeff_count(cfg.gmp), flops=gmp_flops(cfg.gmp))
        results["ridge"] = float(cfg.ridge)
        train_labels_c = ys[tr_abs]
        test_labels_c = ys[te_abs]
        if output_dir is not None:
            save_gmp(model, Path(output_dir) / "model.json")
    else:
        spec = mlp_baseline_spec(cfg.model)
        layers, mlp_hist = _run_stage(
            "train", train_mlp_baseline, spec, train, cfg.adam, cfg.init_seed
        )
        pred_train = _complex(mlp_forward(layers, mlp_features_from_graphs(train.graphs, spec.feature_kind)))
        pred_test = _complex(mlp_forward(layers, mlp_features_from_graphs(test.graphs, spec.feature_kind)))
        ordered = feature_graphs(xs, m, cfg.dataset_count, m)
        pred_ordered = _complex(mlp_forward(layers, mlp_features_from_graphs(ordered, spec.feature_kind)))
        widths = spec.widths(m)
        results.update(
            coeff_count=mlp_coeff_count(widths),
            flops=mlp_flops(widths),
            widths=widths,
            stage1={"iters": int(mlp_hist.shape[0]), "final_mse": float(mlp_hist[-1, 1])},
        )
        hist1 = mlp_hist

    def compute_metrics():
        if cfg.model == "gmp":
            tr_ref, te_ref = train_labels_c, test_labels_c
        else:
            tr_ref, te_ref = _complex(train.labels), _complex(test.labels)
        results["nmse_train_db"] = nmse_db(pred_train, tr_ref)
        results["nmse_test_db"] = nmse_db(pred_test, te_ref)
        plan = _channel_plan(cfg)
        freqs, psd_out = psd_welch(y, cfg.segment)
        lo_db, hi_db = acpr_db(freqs, psd_out, plan)
        results["acpr_output_db"] = [lo_db, hi_db]
        err = ComplexSeq(pred_ordered - ref_ordered, x.sample_rate_hz)
        ref_seq = ComplexSeq(ref_ordered, x.sample_rate_hz)
        ef, err_psd = psd_welch(err, cfg.segment)
        _, ref_psd = psd_welch(ref_seq, cfg.segment)
        return ef, ref_psd, err_psd

    ef, ref_psd, err_psd = _run_stage("metrics", compute_metrics)

    report = {
        "schema_version": SCHEMA_VERSION,
        "config_hash": chash,
        "config": cfg.to_dict(),
        "results": results,
    }

    if output_dir is not None:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        tag = f"config_hash={chash}"
        (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        if hist1 is not None and hist1.size:
            write_history_csv(hist1, out / "history_stage1.csv", tag)
        if lm_result is not None and lm_result.history.size:
            _write_lm_history_csv(lm_result.history, out / "history_stage2.csv", tag)
        err_db = 10.0 * np.log10(np.maximum(err_psd, 1e-30))
        ref_db = 10.0 * np.log10(np.maximum(ref_psd, 1e-30))
        lines = [f"# {tag}", "freq_hz,ref_psd_db,error_psd_db"]
        lines += [
            f"{float(f)!r},{float(r)!r},{float(e)!r}"
            for f, r, e in zip(ef, ref_db, err_db)
        ]
        (out / "error_spectrum.csv").write_text("\n".join(lines) + "\n")
        if conv_params is not None:
            save_params(conv_params, cfg.arch, out / "model.json")
    return report


def _write_lm_history_csv(history: np.ndarray, path, comment: str | None = None) -> None:
    lines = []
    if comment:
        lines.append(f"# {comment}")
    lines.append("iter,mse,mu,accepted,grad_norm")
    for row in history:
        lines.append(
            f"{int(row[0])},{float(row[1])!r},{float(row[2])!r},"
            f"{int(row[3])},{float(row[4])!r}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def run_dpd_experiment(cfg: ExperimentConfig, output_dir=None) -> dict:
    """Indirect-learning DPD pipeline; returns (and optionally writes) a report."""
    if cfg.model != "conv_net":
        raise ValueError("DPD is implemented for the conv_net model only")
    chash = config_hash(cfg)

    x = _run_stage("signal", generate_ofdm, cfg.signal)
    drive = x.scaled(10.0 ** (-cfg.drive_backoff_db / 20.0))
    pa = _run_stage("pa", default_pa, cfg.pa_seed, cfg.pa_k_order, cfg.pa_q_depth)
    imp = _run_stage("impairment", _impairments, cfg)

    params, info = _run_stage(
        "train",
        train_dpd,
        pa,
        drive,
        cfg.arch,
        cfg.adam,
        cfg.lm,
        cfg.dataset_count,
        cfg.split_seed,
        cfg.init_seed,
        imp,
    )
    result, spectra = _run_stage(
        "linearize",
        evaluate_linearization,
        pa,
        drive,
        params,
        cfg.arch,
        info["scale"],
        _channel_plan(cfg),
        info["gain_estimate"],
        info["nmse_inverse_db"],
        imp,
        cfg.segment,
    )

    report = {
        "schema_version": SCHEMA_VERSION,
        "config_hash": chash,
        "config": cfg.to_dict(),
        "result": result.to_dict(),
    }
    if output_dir is not None:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        tag = f"config_hash={chash}"
        (out / "dpd_result.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        write_spectrum_csv(spectra["freqs_hz"], spectra["psd_before"],
                           out / "spectrum_before.csv", tag)
        write_spectrum_csv(spectra["freqs_hz"], spectra["psd_after"],
                           out / "spectrum_after.csv", tag)
        save_params(params, cfg.arch, out / "inverse_model.json")
    return report


def sweep_memory(cfg: ExperimentConfig, m_values, output_dir=None) -> list[dict]:
    """Repeat the modeling experiment across memory depths.

    Each run rebuilds the PA with a matched memory span (q_depth = M + 1)
    and resizes the feature graphs; kernel width shrinks if a depth is too
    small to host it. Returns one row per depth.
    """
    m_values = [int(v) for v in m_values]
    if not m_values:
        raise ValueError("need at least one memory depth")
    rows = []
    for m in m_values:
        arch = replace(
            cfg.arch,
            memory_depth=m,
            kernel_cols=min(cfg.arch.kernel_cols, m + 1),
        )
        sub = replace(cfg, arch=arch, pa_q_depth=m + 1)
        report = run_experiment(sub)
        rows.append(
            {
                "memory_depth": m,
                "coeff_count": report["results"]["coeff_count"],
                "nmse_train_db": report["results"]["nmse_train_db"],
                "nmse_test_db": report["results"]["nmse_test_db"],
            }
        )
    if output_dir is not None:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        lines = [f"# config_hash={config_hash(cfg)}",
                 "memory_depth,coeff_count,nmse_train_db,nmse_test_db"]
        for r in rows:
            lines.append(
                f"{r['memory_depth']},{r['coeff_count']},"
                f"{float(r['nmse_train_db'])!r},{float(r['nmse_test_db'])!r}"
            )
        (out / "memory_sweep.csv").write_text("\n".join(lines) + "\n")
    return rows
