"""Two-stage training: full-batch Adam over everything, then a
Levenberg-Marquardt polish of the fully connected and output layers with the
convolutional front end frozen (the trained kernels act as a fixed filter).

The cost everywhere is mse = (1/2N) * sum[(I'-I)^2 + (Q'-Q)^2].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .network import (
    ConvNetArch,
    ConvNetParams,
    MlpLayer,
    _forward_parts,
    _graph_windows,
)

__all__ = [
    "AdamConfig",
    "LmConfig",
    "TrainingError",
    "mse_cost",
    "backprop_grads",
    "AdamState",
    "adam_init",
    "adam_step",
    "train_stage1_adam",
    "train_stage2_lm",
    "LmResult",
    "pack_fc",
    "unpack_fc",
    "mlp_cost_and_grads",
    "train_mlp_adam",
    "write_history_csv",
]


class TrainingError(RuntimeError):
    """Raised when an optimizer diverges or its linear solves fail."""


@dataclass(frozen=True)
class AdamConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    max_iters: int = 200_000
    mse_threshold: float = 1.2e-7

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        for name in ("beta1", "beta2"):
            b = getattr(self, name)
            if not 0.0 <= b < 1.0:
                raise ValueError(f"{name} must lie in [0, 1)")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.mse_threshold >= 0:
            raise ValueError("mse_threshold must be >= 0")


@dataclass(frozen=True)
class LmConfig:
    mu_init: float = 1e-3
    mu_up: float = 10.0
    mu_down: float = 0.1
    max_iters: int = 200
    grad_tol: float = 1e-9
    mu_max: float = 1e12
    min_rel_improvement: float = 5e-3

    def __post_init__(self):
        if not self.mu_init > 0:
            raise ValueError("mu_init must be positive")
        if not self.mu_up > 1.0:
            raise ValueError("mu_up must exceed 1")
        if not 0.0 < self.mu_down < 1.0:
            raise ValueError("mu_down must lie in (0, 1)")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


def _mse_from_outputs(outputs: np.ndarray, labels: np.ndarray) -> float:
    resid = outputs - labels
    return float((resid * resid).sum() / (2 * labels.shape[0]))


def mse_cost(params: ConvNetParams, arch: ConvNetArch, data: Dataset) -> float:
    parts = _forward_parts(params, arch, data.graphs)
    return _mse_from_outputs(parts.outputs, data.labels)


def _cost_and_grads(params, arch, graphs, labels, windows=None):
    """Batch MSE and its gradients via reverse-mode chain rule."""
    parts = _forward_parts(params, arch, graphs, windows)
    n = labels.shape[0]
    resid = parts.outputs - labels
    cost = float((resid * resid).sum() / (2 * n))

    d_out = resid / n  # (N, 2)
    g_out_w = parts.fc_out.T @ d_out
    g_out_b = d_out.sum(axis=0)

    d_fc = (d_out @ params.out_weights.T) * arch.fc_activation.derivative(parts.fc_pre)
    g_fc_w = parts.flat.T @ d_fc
    g_fc_b = d_fc.sum(axis=0)

    d_flat = d_fc @ params.fc_weights.T
    d_maps = d_flat.reshape(parts.maps.shape)
    d_pre = d_maps * arch.conv_activation.derivative(parts.pre_maps)
    g_ker = np.einsum("nbcrs,nlbc->lrs", parts.windows, d_pre, optimize=True)
    g_kb = d_pre.sum(axis=(0, 2, 3))

    grads = ConvNetParams(g_ker, g_kb, g_fc_w, g_fc_b, g_out_w, g_out_b)
    return cost, grads


def backprop_grads(params: ConvNetParams, arch: ConvNetArch, data: Dataset) -> ConvNetParams:
    """Gradient of the MSE cost, shaped like the parameters."""
    return _cost_and_grads(params, arch, data.graphs, data.labels)[1]


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0


def adam_init(values: list[np.ndarray]) -> AdamState:
    return AdamState([np.zeros_like(a) for a in values], [np.zeros_like(a) for a in values])


def adam_step(values: list[np.ndarray], grads: list[np.ndarray],
              state: AdamState, cfg: AdamConfig) -> list[np.ndarray]:
    """One Adam update with bias correction; returns the new values."""
    state.step += 1
    k = state.step
    b1c = 1.0 - cfg.beta1**k
    b2c = 1.0 - cfg.beta2**k
    out = []
    for idx, (val, grad) in enumerate(zip(values, grads)):
        state.m[idx] = cfg.beta1 * state.m[idx] + (1.0 - cfg.beta1) * grad
        state.v[idx] = cfg.beta2 * state.v[idx] + (1.0 - cfg.beta2) * grad * grad
        m_hat = state.m[idx] / b1c
        v_hat = state.v[idx] / b2c
        out.append(val - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon))
    return out


def train_stage1_adam(
    params: ConvNetParams,
    arch: ConvNetArch,
    train: Dataset,
    cfg: AdamConfig,
    test: Dataset | None = None,
) -> tuple[ConvNetParams, np.ndarray]:
    """Full-batch Adam until mse < threshold or max_iters.

    History rows are (iteration, mse_train) or (iteration, mse_train,
    mse_test) when a test split is supplied.
    """
    params.check_shapes(arch)
    windows = _graph_windows(train.graphs, arch)
    test_windows = _graph_windows(test.graphs, arch) if test is not None else None
    values = [a.copy() for a in params.as_list()]
    state = adam_init(values)
    history = []
    for it in range(1, cfg.max_iters + 1):
        current = ConvNetParams.from_list(values)
        cost, grads = _cost_and_grads(current, arch, train.graphs, train.labels, windows)
        if not np.isfinite(cost):
            raise TrainingError(f"Adam diverged at iteration {it} (mse={cost})")
        if test is not None:
            tp = _forward_parts(current, arch, test.graphs, test_windows)
            history.append((it, cost, _mse_from_outputs(tp.outputs, test.labels)))
        else:
            history.append((it, cost))
        if cost < cfg.mse_threshold:
            return current, np.asarray(history)
        values = adam_step(values, grads.as_list(), state, cfg)
    return ConvNetParams.from_list(values), np.asarray(history)


def pack_fc(params: ConvNetParams) -> np.ndarray:
    """FC + output parameters as one vector (fc_w, fc_b, out_w, out_b)."""
    return np.concatenate([
        params.fc_weights.ravel(),
        params.fc_biases,
        params.out_weights.ravel(),
        params.out_biases,
    ])


def unpack_fc(theta: np.ndarray, arch: ConvNetArch) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    f, t = arch.n_flat_features, arch.fc_neurons
    n_out = 2
    sizes = [f * t, t, t * n_out, n_out]
    if theta.size != sum(sizes):
        raise ValueError(f"theta has {theta.size} entries, expected {sum(sizes)}")
    o = 0
    parts = []
    for size in sizes:
        parts.append(theta[o : o + size])
        o += size
    return (
        parts[0].reshape(f, t),
        parts[1].copy(),
        parts[2].reshape(t, n_out),
        parts[3].copy(),
    )


@dataclass
class LmResult:
    """History rows are (iteration, mse, mu, accepted, grad_norm)."""

    history: np.ndarray
    converged: bool
    reason: str

    @property
    def n_iters(self) -> int:
        return self.history.shape[0]


def _fc_eval(theta, arch, flat, labels):
    fc_w, fc_b, out_w, out_b = unpack_fc(theta, arch)
    fc_pre = flat @ fc_w + fc_b
    fc_out = arch.fc_activation(fc_pre)
    outputs = fc_out @ out_w + out_b
    resid = (outputs - labels).reshape(-1)  # component index fastest
    return resid, fc_pre, fc_out, out_w


def _fc_jacobian(arch, flat, fc_pre, fc_out, out_w):
    """d residual / d theta, shape (2N, |theta|), residual order (n, comp)."""
    n, t = fc_pre.shape
    f = flat.shape[1]
    dact = arch.fc_activation.derivative(fc_pre)  # (N, T)
    sens = dact[:, :, None] * out_w[None, :, :]  # (N, T, 2)
    sens = np.moveaxis(sens, 2, 1)  # (N, 2, T)
    j_fc_w = np.einsum("nf,nct->ncft", flat, sens).reshape(n, 2, f * t)
    j_fc_b = sens
    j_out_w = np.zeros((n, 2, t, 2))
    j_out_w[:, 0, :, 0] = fc_out
    j_out_w[:, 1, :, 1] = fc_out
    j_out_w = j_out_w.reshape(n, 2, t * 2)
    j_out_b = np.tile(np.eye(2), (n, 1, 1))
    full = np.concatenate([j_fc_w, j_fc_b, j_out_w, j_out_b], axis=2)
    return full.reshape(2 * n, -1)


def train_stage2_lm(
    params: ConvNetParams,
    arch: ConvNetArch,
    train: Dataset,
    cfg: LmConfig,
) -> tuple[ConvNetParams, LmResult]:
    """Damped Gauss-Newton over the FC and output layers only.

    Steps solve (J'J + mu I) delta = J'e; a step is kept only if the cost
    drops (then mu shrinks), otherwise mu grows and the step is retried.
    The frozen conv features are computed once up front.
    """
    params.check_shapes(arch)
    parts = _forward_parts(params, arch, train.graphs)
    flat = parts.flat
    labels = train.labels
    n = labels.shape[0]

    theta = pack_fc(params)
    resid, fc_pre, fc_out, out_w = _fc_eval(theta, arch, flat, labels)
    mse = float(resid @ resid) / (2 * n)
    mu = cfg.mu_init
    history = []
    converged = False
    reason = "max_iters"
    jac = grad = None
    stale = True

    for it in range(1, cfg.max_iters + 1):
        if stale:
            jac = _fc_jacobian(arch, flat, fc_pre, fc_out, out_w)
            grad = jac.T @ resid
            stale = False
        gnorm = float(np.max(np.abs(grad))) / n
        if gnorm < cfg.grad_tol:
            converged, reason = True, "gradient"
            break

        jtj = jac.T @ jac
        solved = False
        while mu <= cfg.mu_max:
            try:
                delta = np.linalg.solve(jtj + mu * np.eye(jtj.shape[0]), grad)
                solved = True
                break
            except np.linalg.LinAlgError:
                mu *= cfg.mu_up
        if not solved:
            raise TrainingError("LM normal-equation solve failed at every damping level")

        cand = theta - delta
        cand_resid, cand_pre, cand_out, cand_w = _fc_eval(cand, arch, flat, labels)
        cand_mse = float(cand_resid @ cand_resid) / (2 * n)

        accepted = bool(np.isfinite(cand_mse) and cand_mse < mse)
        if accepted:
            rel = (mse - cand_mse) / mse if mse > 0 else 0.0
            theta, resid, fc_pre, fc_out, out_w = cand, cand_resid, cand_pre, cand_out, cand_w
            mse = cand_mse
            mu = max(mu * cfg.mu_down, 1e-14)
            stale = True
            history.append((it, mse, mu, 1, gnorm))
            if rel < cfg.min_rel_improvement:
                converged, reason = True, "stalled"
                break
        else:
            mu *= cfg.mu_up
            history.append((it, mse, mu, 0, gnorm))
            if mu > cfg.mu_max:
                converged, reason = True, "damping_limit"
                break

    fc_w, fc_b, out_w_fin, out_b = unpack_fc(theta, arch)
    trained = ConvNetParams(
        params.conv_kernels.copy(),
        params.conv_biases.copy(),
        fc_w,
        fc_b,
        out_w_fin,
        out_b,
    )
    hist_arr = np.asarray(history, dtype=float) if history else np.zeros((0, 5))
    return trained, LmResult(hist_arr, converged, reason)


def mlp_cost_and_grads(layers: list[MlpLayer], x: np.ndarray, labels: np.ndarray):
    """MSE cost and per-layer (dW, db) for a plain MLP."""
    n = labels.shape[0]
    acts = [np.asarray(x, dtype=float)]
    pres = []
    for layer in layers:
        pre = acts[-1] @ layer.weights + layer.biases
        pres.append(pre)
        acts.append(layer.act(pre))
    resid = acts[-1] - labels
    cost = float((resid * resid).sum() / (2 * n))
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(layers)
    delta = resid / n
    for j in range(len(layers) - 1, -1, -1):
        delta = delta * layers[j].act.derivative(pres[j])
        grads[j] = (acts[j].T @ delta, delta.sum(axis=0))
        if j:
            delta = delta @ layers[j].weights.T
    return cost, grads


def train_mlp_adam(
    layers: list[MlpLayer],
    x: np.ndarray,
    labels: np.ndarray,
    cfg: AdamConfig,
) -> tuple[list[MlpLayer], np.ndarray]:
    """Full-batch Adam over all MLP layers; same stop rules as stage 1."""
    values = []
    for layer in layers:
        values.extend([layer.weights.copy(), layer.biases.copy()])
    state = adam_init(values)
    history = []

    def rebuild(vals):
        return [
            MlpLayer(vals[2 * j], vals[2 * j + 1], layers[j].act)
            for j in range(len(layers))
        ]

    current = rebuild(values)
    for it in range(1, cfg.max_iters + 1):
        cost, grads = mlp_cost_and_grads(current, x, labels)
        if not np.isfinite(cost):
            raise TrainingError(f"Adam diverged at iteration {it} (mse={cost})")
        history.append((it, cost))
        if cost < cfg.mse_threshold:
            return current, np.asarray(history)
        flat_grads = []
        for dw, db in grads:
            flat_grads.extend([dw, db])
        values = adam_step(values, flat_grads, state, cfg)
        current = rebuild(values)
    return current, np.asarray(history)


def write_history_csv(history: np.ndarray, path, comment: str | None = None) -> None:
    """Convergence curve: iter,mse_train[,mse_test] rows."""
    from pathlib import Path

    history = np.asarray(history)
    cols = ["iter", "mse_train"] + (["mse_test"] if history.shape[1] > 2 else [])
    lines = []
    if comment:
        lines.append(f"# {comment}")
    lines.append(",".join(cols))
    for row in history:
        vals = [str(int(row[0]))] + [repr(float(v)) for v in row[1:]]
        lines.append(",".join(vals))
    Path(path).write_text("\n".join(lines) + "\n")
