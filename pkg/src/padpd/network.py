"""Forward passes for the convolutional behavioral model and plain MLPs.

The conv model runs a valid (no padding, stride 1) cross-correlation over the
5 x (M+1) feature graph, giving L maps of shape B x C with B = 5-r+1 and
C = (M+1)-s+1. Maps are flattened kernel-major (then row-major inside a map),
pass through a T-neuron fully connected layer, and end in a 2-neuron linear
output for I and Q.
"""

from __future__ import annotations

import math
from collections import namedtuple
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import expit

__all__ = [
    "Activation",
    "activation",
    "ConvNetArch",
    "ConvNetParams",
    "conv_forward",
    "flatten_maps",
    "forward",
    "forward_batch",
    "init_params",
    "MlpLayer",
    "mlp_forward",
    "mlp_init",
    "save_params",
    "load_params",
]

N_INPUT_ROWS = 5
N_OUTPUTS = 2

ACTIVATION_KINDS = ("sigmoid", "relu", "elu", "leaky_relu", "tanh", "linear")


@dataclass(frozen=True)
class Activation:
    """Pointwise activation with its derivative.

    ``alpha`` scales the negative branch of elu; ``leak`` is the negative
    slope of leaky_relu. Both are ignored by the other kinds.
    """

    kind: str
    alpha: float = 1.0
    leak: float = 0.01

    def __post_init__(self):
        if self.kind not in ACTIVATION_KINDS:
            raise ValueError(f"unknown activation {self.kind!r}, expected one of {ACTIVATION_KINDS}")
        if not self.alpha > 0:
            raise ValueError("elu alpha must be positive")
        if not 0.0 < self.leak < 1.0:
            raise ValueError("leaky_relu slope must lie in (0, 1)")

    def __call__(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if self.kind == "sigmoid":
            return expit(v)
        if self.kind == "relu":
            return np.maximum(v, 0.0)
        if self.kind == "elu":
            return np.where(v >= 0.0, v, self.alpha * np.expm1(np.minimum(v, 0.0)))
        if self.kind == "leaky_relu":
            return np.where(v > 0.0, v, self.leak * v)
        if self.kind == "tanh":
            return np.tanh(v)
        return v.copy()

    def derivative(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if self.kind == "sigmoid":
            s = expit(v)
            return s * (1.0 - s)
        if self.kind == "relu":
            return (v > 0.0).astype(float)
        if self.kind == "elu":
            return np.where(v >= 0.0, 1.0, self.alpha * np.exp(np.minimum(v, 0.0)))
        if self.kind == "leaky_relu":
            return np.where(v > 0.0, 1.0, self.leak)
        if self.kind == "tanh":
            t = np.tanh(v)
            return 1.0 - t * t
        return np.ones_like(v)


def activation(kind: Activation, v: np.ndarray) -> np.ndarray:
    """Apply an activation elementwise (thin functional alias)."""
    return kind(v)


TANH = Activation("tanh")
LINEAR = Activation("linear")


@dataclass(frozen=True)
class ConvNetArch:
    """Architecture of the convolutional behavioral model."""

    memory_depth: int = 3
    n_kernels: int = 3
    kernel_rows: int = 3
    kernel_cols: int = 3
    kernel_depth: int = 1
    fc_neurons: int = 6
    conv_activation: Activation = TANH
    fc_activation: Activation = TANH

    def __post_init__(self):
        if self.memory_depth < 0:
            raise ValueError("memory_depth must be >= 0")
        if self.kernel_depth != 1:
            raise ValueError("only single-channel (depth 1) kernels are supported")
        if not 1 <= self.kernel_rows <= N_INPUT_ROWS:
            raise ValueError(f"kernel_rows must lie in 1..{N_INPUT_ROWS}")
        if not 1 <= self.kernel_cols <= self.memory_depth + 1:
            raise ValueError("kernel_cols must lie in 1..memory_depth+1")
        if self.n_kernels < 1:
            raise ValueError("n_kernels must be >= 1")
        if self.fc_neurons < 1:
            raise ValueError("fc_neurons must be >= 1")

    @property
    def map_rows(self) -> int:
        return N_INPUT_ROWS - self.kernel_rows + 1

    @property
    def map_cols(self) -> int:
        return (self.memory_depth + 1) - self.kernel_cols + 1

    @property
    def n_flat_features(self) -> int:
        return self.n_kernels * self.map_rows * self.map_cols

    @property
    def input_shape(self) -> tuple[int, int]:
        return (N_INPUT_ROWS, self.memory_depth + 1)


@dataclass(frozen=True)
class ConvNetParams:
    """Trainable parameters, grouped per layer."""

    conv_kernels: np.ndarray  # (L, r, s)
    conv_biases: np.ndarray  # (L,)
    fc_weights: np.ndarray  # (L*B*C, T)
    fc_biases: np.ndarray  # (T,)
    out_weights: np.ndarray  # (T, 2)
    out_biases: np.ndarray  # (2,)

    def __post_init__(self):
        for name in ("conv_kernels", "conv_biases", "fc_weights", "fc_biases", "out_weights", "out_biases"):
            arr = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)

    def as_list(self) -> list[np.ndarray]:
        return [
            self.conv_kernels,
            self.conv_biases,
            self.fc_weights,
            self.fc_biases,
            self.out_weights,
            self.out_biases,
        ]

    @classmethod
    def from_list(cls, arrays: Sequence[np.ndarray]) -> "ConvNetParams":
        return cls(*arrays)

    @property
    def n_coefficients(self) -> int:
        return sum(a.size for a in self.as_list())

    def check_shapes(self, arch: ConvNetArch) -> None:
        expected = {
            "conv_kernels": (arch.n_kernels, arch.kernel_rows, arch.kernel_cols),
            "conv_biases": (arch.n_kernels,),
            "fc_weights": (arch.n_flat_features, arch.fc_neurons),
            "fc_biases": (arch.fc_neurons,),
            "out_weights": (arch.fc_neurons, N_OUTPUTS),
            "out_biases": (N_OUTPUTS,),
        }
        for name, shape in expected.items():
            got = getattr(self, name).shape
            if got != shape:
                raise ValueError(f"{name} has shape {got}, expected {shape} for this arch")


_ForwardParts = namedtuple("_ForwardParts", "windows pre_maps maps flat fc_pre fc_out outputs")


def _graph_windows(graphs: np.ndarray, arch: ConvNetArch) -> np.ndarray:
    """Sliding kernel windows, shape (N, B, C, r, s)."""
    graphs = np.asarray(graphs, dtype=float)
    if graphs.ndim != 3 or graphs.shape[1:] != arch.input_shape:
        raise ValueError(
            f"graphs must have shape (n, {arch.input_shape[0]}, {arch.input_shape[1]}), got {graphs.shape}"
        )
    return np.lib.stride_tricks.sliding_window_view(
        graphs, (arch.kernel_rows, arch.kernel_cols), axis=(1, 2)
    )


def _forward_parts(params: ConvNetParams, arch: ConvNetArch, graphs: np.ndarray,
                   windows: np.ndarray | None = None) -> _ForwardParts:
    if windows is None:
        windows = _graph_windows(graphs, arch)
    pre = np.einsum("nbcrs,lrs->nlbc", windows, params.conv_kernels, optimize=True)
    pre += params.conv_biases[None, :, None, None]
    maps = arch.conv_activation(pre)
    flat = maps.reshape(maps.shape[0], arch.n_flat_features)
    fc_pre = flat @ params.fc_weights + params.fc_biases
    fc_out = arch.fc_activation(fc_pre)
    outputs = fc_out @ params.out_weights + params.out_biases
    return _ForwardParts(windows, pre, maps, flat, fc_pre, fc_out, outputs)


def conv_forward(graph: np.ndarray, params: ConvNetParams, arch: ConvNetArch) -> np.ndarray:
    """Feature maps (L, B, C) of one graph after the conv activation."""
    graph = np.asarray(graph, dtype=float)
    if graph.shape != arch.input_shape:
        raise ValueError(f"graph has shape {graph.shape}, expected {arch.input_shape}")
    return _forward_parts(params, arch, graph[None])[2][0]


def flatten_maps(maps: np.ndarray) -> np.ndarray:
    """Kernel-major, then row-major flattening: u1(1,1)..u1(B,C), u2(1,1).."""
    maps = np.asarray(maps)
    if maps.ndim != 3:
        raise ValueError("expected feature maps of shape (L, B, C)")
    return maps.reshape(-1)


def forward_batch(params: ConvNetParams, arch: ConvNetArch, graphs: np.ndarray,
                  windows: np.ndarray | None = None) -> np.ndarray:
    """Model outputs, shape (n, 2) with columns (I, Q)."""
    params.check_shapes(arch)
    return _forward_parts(params, arch, graphs, windows).outputs


def forward(params: ConvNetParams, arch: ConvNetArch, graph: np.ndarray) -> tuple[float, float]:
    out = forward_batch(params, arch, np.asarray(graph, dtype=float)[None])[0]
    return float(out[0]), float(out[1])


def _glorot(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_params(arch: ConvNetArch, seed: int = 0) -> ConvNetParams:
    """Glorot-uniform weights, zero biases, fully seeded."""
    rng = np.random.default_rng(seed)
    r, s, l_k = arch.kernel_rows, arch.kernel_cols, arch.n_kernels
    rs = r * s * arch.kernel_depth
    return ConvNetParams(
        conv_kernels=_glorot(rng, (l_k, r, s), rs, rs * l_k),
        conv_biases=np.zeros(l_k),
        fc_weights=_glorot(rng, (arch.n_flat_features, arch.fc_neurons), arch.n_flat_features, arch.fc_neurons),
        fc_biases=np.zeros(arch.fc_neurons),
        out_weights=_glorot(rng, (arch.fc_neurons, N_OUTPUTS), arch.fc_neurons, N_OUTPUTS),
        out_biases=np.zeros(N_OUTPUTS),
    )


@dataclass(frozen=True)
class MlpLayer:
    weights: np.ndarray  # (n_in, n_out)
    biases: np.ndarray  # (n_out,)
    act: Activation = LINEAR

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        b = np.asarray(self.biases, dtype=float)
        if w.ndim != 2 or b.shape != (w.shape[1],):
            raise ValueError("layer weights must be (n_in, n_out) with matching biases")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "biases", b)


def mlp_forward(layers: Sequence[MlpLayer], x: np.ndarray) -> np.ndarray:
    """Chain the layers over a single vector (D,) or a batch (N, D)."""
    out = np.asarray(x, dtype=float)
    single = out.ndim == 1
    if single:
        out = out[None]
    for layer in layers:
        if out.shape[1] != layer.weights.shape[0]:
            raise ValueError(
                f"layer expects {layer.weights.shape[0]} inputs, got {out.shape[1]}"
            )
        out = layer.act(out @ layer.weights + layer.biases)
    return out[0] if single else out


def mlp_init(widths: Sequence[int], hidden_act: Activation, seed: int = 0,
             out_act: Activation = LINEAR) -> list[MlpLayer]:
    """Glorot-initialized MLP; all hidden layers share one activation."""
    if len(widths) < 2:
        raise ValueError("widths must list at least input and output sizes")
    rng = np.random.default_rng(seed)
    layers = []
    for j in range(len(widths) - 1):
        n_in, n_out = widths[j], widths[j + 1]
        act = out_act if j == len(widths) - 2 else hidden_act
        layers.append(MlpLayer(_glorot(rng, (n_in, n_out), n_in, n_out), np.zeros(n_out), act))
    return layers


def _act_to_dict(act: Activation) -> dict:
    return {"kind": act.kind, "alpha": act.alpha, "leak": act.leak}


def _act_from_dict(d: dict) -> Activation:
    return Activation(d["kind"], d.get("alpha", 1.0), d.get("leak", 0.01))


def save_params(params: ConvNetParams, arch: ConvNetArch, path) -> None:
    """JSON checkpoint: arch block plus flat weight arrays (C-order ravel)."""
    import json
    from pathlib import Path

    doc = {
        "arch": {
            "memory_depth": arch.memory_depth,
            "n_kernels": arch.n_kernels,
            "kernel_rows": arch.kernel_rows,
            "kernel_cols": arch.kernel_cols,
            "kernel_depth": arch.kernel_depth,
            "fc_neurons": arch.fc_neurons,
            "conv_activation": _act_to_dict(arch.conv_activation),
            "fc_activation": _act_to_dict(arch.fc_activation),
        },
        "weights": {
            name: [float(v) for v in getattr(params, name).ravel()]
            for name in (
                "conv_kernels",
                "conv_biases",
                "fc_weights",
                "fc_biases",
                "out_weights",
                "out_biases",
            )
        },
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n")


def load_params(path) -> tuple[ConvNetParams, ConvNetArch]:
    import json
    from pathlib import Path

    doc = json.loads(Path(path).read_text())
    ab = doc["arch"]
    arch = ConvNetArch(
        memory_depth=ab["memory_depth"],
        n_kernels=ab["n_kernels"],
        kernel_rows=ab["kernel_rows"],
        kernel_cols=ab["kernel_cols"],
        kernel_depth=ab.get("kernel_depth", 1),
        fc_neurons=ab["fc_neurons"],
        conv_activation=_act_from_dict(ab["conv_activation"]),
        fc_activation=_act_from_dict(ab["fc_activation"]),
    )
    w = doc["weights"]
    shapes = {
        "conv_kernels": (arch.n_kernels, arch.kernel_rows, arch.kernel_cols),
        "conv_biases": (arch.n_kernels,),
        "fc_weights": (arch.n_flat_features, arch.fc_neurons),
        "fc_biases": (arch.fc_neurons,),
        "out_weights": (arch.fc_neurons, N_OUTPUTS),
        "out_biases": (N_OUTPUTS,),
    }
    arrays = {name: np.asarray(w[name], dtype=float).reshape(shape) for name, shape in shapes.items()}
    params = ConvNetParams(**arrays)
    params.check_shapes(arch)
    return params, arch
