"""Fully-connected networks in plain numpy: spec, forward/backward, Adam.

Everything runs in float64. Layers are affine maps followed by either the
identity (``"linear"``) or ReLU; the loss is the mean absolute error plus an
l2 penalty on the weight matrices (biases are not penalized).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "MlpSpec",
    "MlpParams",
    "AdamConfig",
    "AdamState",
    "init_params",
    "forward",
    "mae_loss",
    "backward",
    "adam_init",
    "adam_step",
    "E2E_DL_HIDDEN",
    "E2E_UL_HIDDEN",
    "UNFOLDED_HIDDEN",
]

ACTIVATIONS = ("linear", "relu")

# hidden widths of the three network layouts
E2E_DL_HIDDEN = (1024, 512, 256, 128, 64)
E2E_UL_HIDDEN = (64, 32, 16)
UNFOLDED_HIDDEN = (128,)


@dataclass(frozen=True)
class MlpSpec:
    """Layer widths (input first) and one activation per non-input layer."""

    layer_sizes: tuple
    activations: tuple

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))
        object.__setattr__(self, "activations", tuple(self.activations))
        if len(self.layer_sizes) < 2:
            raise ValueError("need at least an input and an output layer")
        if any(s < 1 for s in self.layer_sizes):
            raise ValueError("layer sizes must be positive")
        if len(self.activations) != len(self.layer_sizes) - 1:
            raise ValueError("one activation per non-input layer is required")
        bad = set(self.activations) - set(ACTIVATIONS)
        if bad:
            raise ValueError(f"unknown activations {sorted(bad)}")

    @classmethod
    def pyramid(cls, n_in, hidden, n_out):
        """First hidden layer linear, every later layer (output included) ReLU."""
        sizes = (n_in, *hidden, n_out)
        acts = ("linear",) + ("relu",) * (len(sizes) - 2) if hidden else ("relu",)
        return cls(sizes, acts)

    @property
    def n_layers(self):
        return len(self.layer_sizes) - 1

    @property
    def n_inputs(self):
        return self.layer_sizes[0]

    @property
    def n_outputs(self):
        return self.layer_sizes[-1]

    def layer_param_counts(self):
        s = self.layer_sizes
        return [(s[i] + 1) * s[i + 1] for i in range(self.n_layers)]

    def param_count(self):
        return int(sum(self.layer_param_counts()))

    def to_dict(self):
        return {"layer_sizes": list(self.layer_sizes), "activations": list(self.activations)}


@dataclass
class MlpParams:
    weights: list = field(default_factory=list)  # (fan_in, fan_out) each
    biases: list = field(default_factory=list)

    def copy(self):
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def check(self, spec: MlpSpec):
        s = spec.layer_sizes
        if len(self.weights) != spec.n_layers or len(self.biases) != spec.n_layers:
            raise ValueError("parameter list does not match the layer layout")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (s[i], s[i + 1]) or b.shape != (s[i + 1],):
                raise ValueError(f"layer {i} has shape {w.shape}/{b.shape}")

    def flat(self):
        return np.concatenate([a.ravel() for pair in zip(self.weights, self.biases)
                               for a in pair])

    @classmethod
    def from_flat(cls, vec, spec: MlpSpec):
        s = spec.layer_sizes
        weights, biases, pos = [], [], 0
        for i in range(spec.n_layers):
            n = s[i] * s[i + 1]
            weights.append(np.array(vec[pos:pos + n], dtype=float).reshape(s[i], s[i + 1]))
            pos += n
            biases.append(np.array(vec[pos:pos + s[i + 1]], dtype=float))
            pos += s[i + 1]
        return cls(weights, biases)


def init_params(spec: MlpSpec, seed=None, output_bias=0.0) -> MlpParams:
    """Glorot-uniform weights, zero hidden biases, constant ``output_bias``."""
    rng = np.random.default_rng(seed)
    s = spec.layer_sizes
    weights, biases = [], []
    for i in range(spec.n_layers):
        limit = np.sqrt(6.0 / (s[i] + s[i + 1]))
        weights.append(rng.uniform(-limit, limit, size=(s[i], s[i + 1])))
        biases.append(np.zeros(s[i + 1]))
    biases[-1][:] = output_bias
    return MlpParams(weights, biases)


def _forward_cache(params, spec, X):
    acts = [X]
    pre = []
    h = X
    for w, b, kind in zip(params.weights, params.biases, spec.activations):
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0) if kind == "relu" else z
        acts.append(h)
    return acts, pre


def forward(params: MlpParams, spec: MlpSpec, x):
    """Network output for one sample ``(n_in,)`` or a batch ``(n, n_in)``."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    out = _forward_cache(params, spec, X)[0][-1]
    return out[0] if single else out


def mae_loss(params, spec, X, Y, l2=0.0):
    """Mean absolute error over all batch entries plus ``l2/2 * sum ||W||^2``."""
    out = forward(params, spec, X)
    penalty = 0.5 * l2 * sum(float(np.sum(w * w)) for w in params.weights)
    return float(np.mean(np.abs(out - Y))) + penalty


def backward(params: MlpParams, spec: MlpSpec, X, Y, l2=0.0):
    """Loss and gradients of :func:`mae_loss`.

    The subgradient of ``|e|`` at ``e = 0`` and of ReLU at 0 are both taken
    as 0.

    Returns
    -------
    loss : float
    grads : MlpParams
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    acts, pre = _forward_cache(params, spec, X)
    err = acts[-1] - Y
    penalty = 0.5 * l2 * sum(float(np.sum(w * w)) for w in params.weights)
    loss = float(np.mean(np.abs(err))) + penalty

    delta = np.sign(err) / err.size
    gw, gb = [None] * spec.n_layers, [None] * spec.n_layers
    for i in range(spec.n_layers - 1, -1, -1):
        if spec.activations[i] == "relu":
            delta = delta * (pre[i] > 0)
        gw[i] = acts[i].T @ delta + l2 * params.weights[i]
        gb[i] = delta.sum(axis=0)
        if i:
            delta = delta @ params.weights[i].T
    return loss, MlpParams(gw, gb)


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class AdamState:
    step: int
    m: MlpParams
    v: MlpParams


def adam_init(params: MlpParams) -> AdamState:
    zeros = MlpParams([np.zeros_like(w) for w in params.weights],
                      [np.zeros_like(b) for b in params.biases])
    return AdamState(step=0, m=zeros, v=zeros.copy())


def adam_step(params: MlpParams, grads: MlpParams, state: AdamState, cfg: AdamConfig,
              lr=None):
    """One bias-corrected Adam update, in place on copies; returns ``(params, state)``."""
    lr = cfg.lr if lr is None else lr
    t = state.step + 1
    c1 = 1.0 - cfg.beta1 ** t
    c2 = 1.0 - cfg.beta2 ** t
    new_p, new_m, new_v = MlpParams(), MlpParams(), MlpParams()
    for group in ("weights", "biases"):
        for p, g, m, v in zip(getattr(params, group), getattr(grads, group),
                              getattr(state.m, group), getattr(state.v, group)):
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * g
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g
            getattr(new_p, group).append(p - lr * (m / c1) / (np.sqrt(v / c2) + cfg.eps))
            getattr(new_m, group).append(m)
            getattr(new_v, group).append(v)
    return new_p, AdamState(step=t, m=new_m, v=new_v)
