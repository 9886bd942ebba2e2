"""Dense networks with exact backprop and Adam; the substrate every
learned component shares.

Nets are plain numpy. A forward pass returns a tape; backward consumes
the tape and returns gradients in parameter order. Tapes are versioned:
once an optimizer step touches the parameters, tapes recorded before the
step raise TapeError instead of silently producing wrong gradients.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import OptimError, ShapeError, TapeError

ACTIVATIONS = ("relu", "tanh_scaled", "sigmoid", "linear")


@dataclass
class Layer:
    w: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)
    act: str
    act_scale: float = 1.0

    def __post_init__(self):
        if self.act not in ACTIVATIONS:
            raise ShapeError(f"unknown activation {self.act!r}")
        if self.w.ndim != 2 or self.b.shape != (self.w.shape[0],):
            raise ShapeError(f"layer shapes inconsistent: w{self.w.shape} b{self.b.shape}")


def _act(z: np.ndarray, layer: Layer) -> np.ndarray:
    if layer.act == "relu":
        return np.maximum(z, 0.0)
    if layer.act == "tanh_scaled":
        return layer.act_scale * np.tanh(z)
    if layer.act == "sigmoid":
        return expit(z)
    return z


def _act_grad(y: np.ndarray, layer: Layer) -> np.ndarray:
    """Derivative of the activation expressed through its output y."""
    if layer.act == "relu":
        return (y > 0.0).astype(np.float64)
    if layer.act == "tanh_scaled":
        t = y / layer.act_scale
        return layer.act_scale * (1.0 - t * t)
    if layer.act == "sigmoid":
        return y * (1.0 - y)
    return np.ones_like(y)


class DenseNet:
    """A stack of affine layers with fixed activation tags."""

    def __init__(self, layers: list[Layer], seed: int | None = None):
        self.layers = layers
        self.seed = seed
        self.version = 0
        for prev, nxt in zip(layers, layers[1:]):
            if nxt.w.shape[1] != prev.w.shape[0]:
                raise ShapeError(
                    f"layer dims mismatch: {prev.w.shape[0]} -> expected input {nxt.w.shape[1]}"
                )

    @classmethod
    def create(
        cls,
        dims: list[int],
        acts: list[str],
        seed: int,
        scales: dict[int, float] | None = None,
    ) -> "DenseNet":
        """He-uniform init for relu layers, Xavier-uniform otherwise."""
        if len(acts) != len(dims) - 1:
            raise ShapeError(f"{len(dims)} dims need {len(dims) - 1} activations, got {len(acts)}")
        rng = np.random.default_rng(seed)
        layers = []
        for i, (fan_in, fan_out, act) in enumerate(zip(dims, dims[1:], acts)):
            if act == "relu":
                limit = np.sqrt(6.0 / fan_in)
            else:
                limit = np.sqrt(6.0 / (fan_in + fan_out))
            w = rng.uniform(-limit, limit, size=(fan_out, fan_in))
            b = np.zeros(fan_out)
            scale = (scales or {}).get(i, 1.0)
            layers.append(Layer(w=w, b=b, act=act, act_scale=scale))
        return cls(layers, seed=seed)

    @property
    def in_dim(self) -> int:
        return self.layers[0].w.shape[1]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].w.shape[0]

    def parameters(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.append(layer.w)
            out.append(layer.b)
        return out

    def to_dict(self) -> dict:
        return {
            "dims": [self.in_dim] + [l.w.shape[0] for l in self.layers],
            "acts": [l.act for l in self.layers],
            "scales": [l.act_scale for l in self.layers],
            "weights": [l.w.tolist() for l in self.layers],
            "biases": [l.b.tolist() for l in self.layers],
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DenseNet":
        layers = [
            Layer(
                w=np.asarray(w, dtype=np.float64),
                b=np.asarray(b, dtype=np.float64),
                act=act,
                act_scale=scale,
            )
            for w, b, act, scale in zip(d["weights"], d["biases"], d["acts"], d["scales"])
        ]
        return cls(layers, seed=d.get("seed"))


@dataclass
class Tape:
    """Cached per-layer inputs and outputs of one forward pass."""

    net: DenseNet
    version: int
    inputs: list[np.ndarray]
    outputs: list[np.ndarray]
    squeezed: bool


def forward(net: DenseNet, x: np.ndarray) -> tuple[np.ndarray, Tape]:
    """Run the net; x may be a single vector or a (batch, in) matrix."""
    x = np.asarray(x, dtype=np.float64)
    squeezed = x.ndim == 1
    a = x[None, :] if squeezed else x
    if a.ndim != 2 or a.shape[1] != net.in_dim:
        raise ShapeError(f"input shape {x.shape} does not match in_dim {net.in_dim}")
    inputs, outputs = [], []
    for layer in net.layers:
        inputs.append(a)
        a = _act(a @ layer.w.T + layer.b, layer)
        outputs.append(a)
    y = a[0] if squeezed else a
    return y, Tape(net=net, version=net.version, inputs=inputs, outputs=outputs, squeezed=squeezed)


def backward(net: DenseNet, tape: Tape, dldy: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """Exact reverse-mode gradients.

    Returns (grads aligned with net.parameters(), gradient w.r.t. x).
    """
    if tape.net is not net:
        raise TapeError("tape was recorded on a different net")
    if tape.version != net.version:
        raise TapeError("stale tape: parameters changed since this forward pass")
    up = np.asarray(dldy, dtype=np.float64)
    if tape.squeezed:
        up = up[None, :]
    if up.shape != tape.outputs[-1].shape:
        raise ShapeError(f"upstream gradient shape {dldy.shape} mismatches output")
    grads: list[np.ndarray] = []
    for layer, a_in, a_out in zip(net.layers[::-1], tape.inputs[::-1], tape.outputs[::-1]):
        dz = up * _act_grad(a_out, layer)
        grads.append(dz.sum(axis=0))  # db
        grads.append(dz.T @ a_in)  # dw
        up = dz @ layer.w
    grads.reverse()
    dx = up[0] if tape.squeezed else up
    return grads, dx


class Adam:
    """Adam with decoupled weight decay: p <- p(1 - lr*wd) - lr*mhat/(sqrt(vhat)+eps)."""

    def __init__(
        self,
        params: list[np.ndarray],
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        weight_decay: float = 0.0,
        nets: list[DenseNet] | None = None,
    ):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.nets = nets or []

    def step(self, grads: list[np.ndarray]) -> None:
        if len(grads) != len(self.params):
            raise ShapeError(f"expected {len(self.params)} gradients, got {len(grads)}")
        for g in grads:
            if not np.all(np.isfinite(g)):
                raise OptimError("non-finite gradient")
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            if g.shape != p.shape:
                raise ShapeError(f"gradient shape {g.shape} mismatches parameter {p.shape}")
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            if self.weight_decay:
                p *= 1.0 - self.lr * self.weight_decay
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
        for net in self.nets:
            net.version += 1

    def to_dict(self) -> dict:
        return {
            "lr": self.lr,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "weight_decay": self.weight_decay,
            "t": self.t,
            "m": [a.tolist() for a in self.m],
            "v": [a.tolist() for a in self.v],
        }

    def load_dict(self, d: dict) -> None:
        self.lr = d["lr"]
        self.beta1 = d["beta1"]
        self.beta2 = d["beta2"]
        self.eps = d["eps"]
        self.weight_decay = d["weight_decay"]
        self.t = d["t"]
        self.m = [np.asarray(a) for a in d["m"]]
        self.v = [np.asarray(a) for a in d["v"]]


def adam_step(state: Adam, params: list[np.ndarray], grads: list[np.ndarray]) -> list[np.ndarray]:
    """Functional wrapper over Adam.step for callers holding loose params."""
    if len(params) != len(state.params) or any(p is not q for p, q in zip(params, state.params)):
        raise OptimError("params do not belong to this optimizer state")
    state.step(grads)
    return params


def save_checkpoint(path, nets: dict[str, DenseNet], optimizer: Adam | None = None, extra: dict | None = None) -> None:
    """JSON checkpoint; float round-trip is exact (shortest-repr doubles)."""
    blob = {"nets": {k: n.to_dict() for k, n in nets.items()}}
    if optimizer is not None:
        blob["adam"] = optimizer.to_dict()
    if extra:
        blob["extra"] = extra
    with open(path, "w") as fh:
        json.dump(blob, fh, indent=1, sort_keys=True)


def load_checkpoint(path) -> dict:
    with open(path) as fh:
        blob = json.load(fh)
    blob["nets"] = {k: DenseNet.from_dict(d) for k, d in blob["nets"].items()}
    return blob


def finite_difference_check(
    loss_fn,
    params: list[np.ndarray],
    analytic: list[np.ndarray],
    eps: float = 1e-4,
    max_coords: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Max relative error between analytic grads and central differences.

    loss_fn() must read `params` in place and return a scalar.  When
    max_coords is set, that many coordinates per parameter are probed
    (randomly, seeded) instead of all of them.
    """
    worst = 0.0
    for p, g in zip(params, analytic):
        flat_p = p.reshape(-1)
        flat_g = np.asarray(g).reshape(-1)
        idx = np.arange(flat_p.size)
        if max_coords is not None and flat_p.size > max_coords:
            gen = rng if rng is not None else np.random.default_rng(0)
            idx = gen.choice(flat_p.size, size=max_coords, replace=False)
        for i in idx:
            keep = flat_p[i]
            flat_p[i] = keep + eps
            hi = loss_fn()
            flat_p[i] = keep - eps
            lo = loss_fn()
            flat_p[i] = keep
            num = (hi - lo) / (2.0 * eps)
            rel = abs(num - flat_g[i]) / max(abs(num) + abs(flat_g[i]), 1e-6)
            worst = max(worst, rel)
    return worst
