"""Sine-activated MLPs with hand-written backprop and an Adam training loop.

The network maps a per-voxel coordinate vector to one scalar. Every layer but
the last computes ``sin(omega_0 * (h @ W + b))``; the last layer is linear.
Hidden weights are stored divided by ``omega_0`` so that the effective weight
``omega_0 * W`` is drawn from ``U(-sqrt(6/fan_in), +sqrt(6/fan_in))``. Storing
them this way (rather than the effective values) keeps Adam's per-step move
in effective-weight space at ``omega_0 * lr``.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np


@dataclass
class SirenNetwork:
    widths: tuple[int, ...]
    omega_0: float
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    # on-disk precision; "f16" nets hold float32 arrays of half-representable values
    storage: str = "f32"

    @property
    def omegas(self) -> list[float]:
        """Per-layer frequency; 1.0 marks the linear head."""
        n = len(self.weights)
        if n == 1:
            return [self.omega_0]
        return [self.omega_0] * (n - 1) + [1.0]

    @property
    def sine_layers(self) -> list[bool]:
        n = len(self.weights)
        return [True] if n == 1 else [True] * (n - 1) + [False]

    @property
    def n_params(self) -> int:
        return parameter_count(self.widths)

    def effective_weights(self) -> list[np.ndarray]:
        return [w * np.float32(o) for w, o in zip(self.weights, self.omegas)]

    @property
    def dtype(self):
        return self.weights[0].dtype

    def astype(self, dtype) -> "SirenNetwork":
        return SirenNetwork(
            self.widths,
            self.omega_0,
            [w.astype(dtype) for w in self.weights],
            [b.astype(dtype) for b in self.biases],
            self.storage,
        )

    def copy(self) -> "SirenNetwork":
        return self.astype(self.dtype)

    def params(self) -> list[np.ndarray]:
        """Parameters in layer-major order: W0, b0, W1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def set_params(self, params: list[np.ndarray]) -> None:
        self.weights = [p for p in params[0::2]]
        self.biases = [p for p in params[1::2]]

    def __call__(self, coords: np.ndarray) -> np.ndarray:
        return forward(self, coords)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SirenNetwork):
            return NotImplemented
        return (
            tuple(self.widths) == tuple(other.widths)
            and self.omega_0 == other.omega_0
            and self.storage == other.storage
            and all(np.array_equal(a, b) for a, b in zip(self.params(), other.params()))
        )


def to_half(net: SirenNetwork) -> SirenNetwork:
    """Round every parameter to the nearest float16 and mark the net for 16-bit storage."""
    return SirenNetwork(
        net.widths,
        net.omega_0,
        [w.astype(np.float16).astype(np.float32) for w in net.weights],
        [b.astype(np.float16).astype(np.float32) for b in net.biases],
        "f16",
    )


def parameter_count(widths) -> int:
    return sum((a + 1) * b for a, b in zip(widths[:-1], widths[1:]))


def _check_widths(widths) -> tuple[int, ...]:
    widths = tuple(int(w) for w in widths)
    if len(widths) < 2:
        raise ValueError(f"need at least input and output widths, got {widths}")
    if any(w <= 0 for w in widths):
        raise ValueError(f"all layer widths must be positive, got {widths}")
    return widths


def init(widths, omega_0: float, seed: int = 0, dtype=np.float32) -> SirenNetwork:
    """Draw a fresh network with the standard sine-network initialisation.

    First layer: ``U(-1/fan_in, 1/fan_in)``. Later layers:
    ``U(-c, c) / omega_0`` with ``c = sqrt(6/fan_in)``. Biases share the
    bounds of their layer's weights.
    """
    widths = _check_widths(widths)
    if not omega_0 > 0:
        raise ValueError(f"omega_0 must be positive, got {omega_0}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for i, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
        bound = 1.0 / fan_in if i == 0 else math.sqrt(6.0 / fan_in) / omega_0
        weights.append(rng.uniform(-bound, bound, (fan_in, fan_out)).astype(dtype))
        biases.append(rng.uniform(-bound, bound, fan_out).astype(dtype))
    return SirenNetwork(widths, float(omega_0), weights, biases)


def forward(net: SirenNetwork, coords: np.ndarray) -> np.ndarray:
    """Evaluate the network on ``(n, in_width)`` coordinates, returns ``(n,)``."""
    h = np.asarray(coords, dtype=net.dtype)
    for w, b, om, sine in zip(net.weights, net.biases, net.omegas, net.sine_layers):
        z = h @ w
        z += b
        if sine:
            if om != 1.0:
                z *= net.dtype.type(om)
            np.sin(z, out=z)
        h = z
    return h[:, 0]


def _forward_cache(net: SirenNetwork, coords: np.ndarray):
    h = np.asarray(coords, dtype=net.dtype)
    acts, pres = [h], []
    for w, b, om, sine in zip(net.weights, net.biases, net.omegas, net.sine_layers):
        z = h @ w
        z += b
        if sine:
            if om != 1.0:
                z *= net.dtype.type(om)
            pres.append(z)
            h = np.sin(z)
        else:
            pres.append(None)
            h = z
        acts.append(h)
    return acts, pres


def _backward(net: SirenNetwork, acts, pres, grad_out: np.ndarray) -> list[np.ndarray]:
    omegas = net.omegas
    n_layers = len(net.weights)
    grads: list[np.ndarray] = [None] * (2 * n_layers)  # type: ignore[list-item]
    g = grad_out.reshape(-1, 1).astype(net.dtype, copy=False)
    for i in range(n_layers - 1, -1, -1):
        if pres[i] is not None:
            # pres already holds omega * (hW + b)
            g = g * np.cos(pres[i])
            if omegas[i] != 1.0:
                g *= net.dtype.type(omegas[i])
        grads[2 * i] = acts[i].T @ g
        grads[2 * i + 1] = g.sum(axis=0)
        if i > 0:
            g = g @ net.weights[i].T
    return grads


def loss_and_gradient(net: SirenNetwork, coords: np.ndarray, targets: np.ndarray):
    """Mean squared error and its gradient w.r.t. ``net.params()``."""
    acts, pres = _forward_cache(net, coords)
    pred = acts[-1][:, 0]
    resid = pred - np.asarray(targets, dtype=net.dtype).reshape(-1)
    n = resid.shape[0]
    loss = float(np.dot(resid.astype(np.float64), resid.astype(np.float64)) / n)
    grads = _backward(net, acts, pres, resid * net.dtype.type(2.0 / n))
    return loss, grads


def gradient(net: SirenNetwork, coords: np.ndarray, targets: np.ndarray) -> list[np.ndarray]:
    return loss_and_gradient(net, coords, targets)[1]


def gradient_from_residual(net: SirenNetwork, coords: np.ndarray, resid: np.ndarray) -> list[np.ndarray]:
    """MSE gradient for an externally supplied residual ``pred - target``.

    Holds the predictions fixed, so the result is linear in ``resid``.
    """
    acts, pres = _forward_cache(net, coords)
    resid = np.asarray(resid, dtype=net.dtype).reshape(-1)
    return _backward(net, acts, pres, resid * net.dtype.type(2.0 / resid.shape[0]))


@dataclass
class TrainConfig:
    max_steps: int = 2000
    lr_init: float = 1e-4
    lr_floor_ratio: float = 1e-2
    target_rmse: float = 0.0
    eval_every: int = 100
    sample_fraction: float = 1.0
    full_batch_limit: int = 1 << 20
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def lr(self, step: int) -> float:
        """Cosine annealing from ``lr_init`` down to ``lr_init * lr_floor_ratio``."""
        lo = self.lr_init * self.lr_floor_ratio
        if self.max_steps <= 0:
            return self.lr_init
        t = min(step, self.max_steps) / self.max_steps
        return lo + 0.5 * (self.lr_init - lo) * (1.0 + math.cos(math.pi * t))


@dataclass
class TrainReport:
    steps_run: int
    final_rmse: float
    loss_curve: list[tuple[int, float]] = field(default_factory=list)
    wall_time: float = 0.0
    diverged: bool = False
    reached_target: bool = False


def rmse_of(net: SirenNetwork, coords: np.ndarray, targets: np.ndarray) -> float:
    d = forward(net, coords).astype(np.float64) - np.asarray(targets, np.float64).reshape(-1)
    return float(np.sqrt(np.mean(d * d))) if d.size else 0.0


class Adam:
    def __init__(self, params: list[np.ndarray], cfg: TrainConfig):
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.cfg = cfg
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray], lr: float) -> None:
        c = self.cfg
        self.t += 1
        bc1 = 1.0 - c.beta1**self.t
        bc2 = 1.0 - c.beta2**self.t
        step_size = lr * math.sqrt(bc2) / bc1
        dt = params[0].dtype.type
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= dt(c.beta1)
            m += dt(1.0 - c.beta1) * g
            v *= dt(c.beta2)
            v += dt(1.0 - c.beta2) * (g * g)
            p -= dt(step_size) * m / (np.sqrt(v) + dt(c.eps * math.sqrt(bc2)))


def train(
    net: SirenNetwork,
    coords: np.ndarray,
    targets: np.ndarray,
    cfg: TrainConfig,
) -> tuple[SirenNetwork, TrainReport]:
    """Overfit ``net`` (in place) to ``targets``; returns the best network seen.

    Stops at ``cfg.max_steps`` or once the full-data RMSE, checked every
    ``cfg.eval_every`` steps, drops to ``cfg.target_rmse`` or below.
    """
    t0 = time.perf_counter()
    coords = np.ascontiguousarray(coords, dtype=net.dtype)
    targets = np.asarray(targets, dtype=net.dtype).reshape(-1)
    n = targets.shape[0]
    best = net.copy()
    best_rmse = rmse_of(net, coords, targets)
    curve = [(0, best_rmse)]
    if best_rmse <= cfg.target_rmse or cfg.max_steps <= 0 or n == 0:
        return best, TrainReport(0, best_rmse, curve, time.perf_counter() - t0,
                                 reached_target=best_rmse <= cfg.target_rmse)

    frac = cfg.sample_fraction
    if n > cfg.full_batch_limit and frac >= 1.0:
        frac = 0.25
    rng = np.random.default_rng(cfg.seed)
    batch = max(1, int(round(frac * n)))

    params = net.params()
    opt = Adam(params, cfg)
    steps = 0
    for step in range(cfg.max_steps):
        if batch < n:
            idx = rng.choice(n, batch, replace=False)
            loss, grads = loss_and_gradient(net, coords[idx], targets[idx])
        else:
            loss, grads = loss_and_gradient(net, coords, targets)
        if not math.isfinite(loss):
            return best, TrainReport(step, best_rmse, curve, time.perf_counter() - t0, diverged=True)
        opt.step(params, grads, cfg.lr(step))
        steps = step + 1
        if steps % cfg.eval_every == 0 or steps == cfg.max_steps:
            # loss was measured before this update; re-evaluate the updated net
            r = rmse_of(net, coords, targets)
            if not math.isfinite(r):
                return best, TrainReport(steps, best_rmse, curve, time.perf_counter() - t0, diverged=True)
            curve.append((steps, r))
            if r < best_rmse:
                best_rmse = r
                best = net.copy()
            if r <= cfg.target_rmse:
                break
    return best, TrainReport(
        steps, best_rmse, curve, time.perf_counter() - t0,
        reached_target=best_rmse <= cfg.target_rmse,
    )


def fit(coords, targets, widths, omega_0: float, cfg: TrainConfig) -> tuple[SirenNetwork, TrainReport]:
    net = init(widths, omega_0, seed=cfg.seed)
    return train(net, coords, targets, cfg)
