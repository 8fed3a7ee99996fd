"""LSTM policy trained with REINFORCE against the sink-augmented simulator.

The network sees only the normalized step times ``t_i / T``. Its output is
the mean of a Gaussian policy over normalized actions ``(a_dp, a_d)`` in
``[-1, 1]^2``; every agent in a batch shares the same means and differs only
by sampling noise. Gradients are computed by hand with backpropagation
through time and applied with Adam.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .controls import PiecewiseConstant, pwc_from_actions
from .lindblad import F, pwc_final_populations

__all__ = [
    "PolicyNetwork",
    "TrainConfig",
    "LearningCurve",
    "TrainResult",
    "Adam",
    "init_network",
    "lstm_forward",
    "lstm_backward",
    "sample_actions",
    "reinforce_loss",
    "reinforce_grad_means",
    "rollout_reward",
    "rollout_rewards",
    "train",
    "save_checkpoint",
    "load_checkpoint",
]

log = logging.getLogger(__name__)

PARAM_NAMES = ("W_ih", "W_hh", "b", "W1", "b1", "W2", "b2")
CHECKPOINT_VERSION = 1


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass
class PolicyNetwork:
    """LSTM -> dense(tanh) -> head(tanh) with fixed Gaussian widths.

    LSTM gates are packed along the last axis in the order input, forget,
    output, candidate.
    """

    params: dict[str, np.ndarray]
    sigma: tuple[float, float] = (0.07, 0.07)

    def __post_init__(self):
        self.sigma = (float(self.sigma[0]), float(self.sigma[1]))
        if min(self.sigma) <= 0:
            raise ValueError("policy widths must be positive")
        missing = set(PARAM_NAMES) - set(self.params)
        if missing:
            raise ValueError(f"missing parameters: {sorted(missing)}")

    @property
    def n_units(self) -> int:
        return self.params["W_hh"].shape[0]

    def copy(self) -> "PolicyNetwork":
        return PolicyNetwork({k: v.copy() for k, v in self.params.items()}, self.sigma)

    def flat(self) -> np.ndarray:
        return np.concatenate([self.params[k].ravel() for k in PARAM_NAMES])


def init_network(n_units: int = 50, n_dense: int = 30, sigma=(0.07, 0.07), seed=0,
                 scale: float = 0.1, n_in: int = 1, scheme: str = "uniform") -> PolicyNetwork:
    """Random initial parameters.

    ``scheme="uniform"`` draws every weight and bias from ``[-scale, scale]``.
    ``scheme="glorot"`` uses Glorot-uniform input and dense kernels, an
    orthogonal recurrent kernel, zero biases and a unit forget-gate bias.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if scheme == "glorot":
        return _init_glorot(n_units, n_dense, sigma, rng, n_in)
    if scheme != "uniform":
        raise ValueError(f"unknown init scheme {scheme!r}")
    shapes = {
        "W_ih": (n_in, 4 * n_units),
        "W_hh": (n_units, 4 * n_units),
        "b": (4 * n_units,),
        "W1": (n_units, n_dense),
        "b1": (n_dense,),
        "W2": (n_dense, 2),
        "b2": (2,),
    }
    params = {k: rng.uniform(-scale, scale, size=s) for k, s in shapes.items()}
    return PolicyNetwork(params, sigma)


def _glorot(rng, fan_in, fan_out):
    lim = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-lim, lim, size=(fan_in, fan_out))


def _init_glorot(n_units, n_dense, sigma, rng, n_in):
    H = n_units
    q, r = np.linalg.qr(rng.standard_normal((4 * H, H)))
    W_hh = (q * np.sign(np.diag(r))).T
    b = np.zeros(4 * H)
    b[H:2 * H] = 1.0
    params = {
        "W_ih": _glorot(rng, n_in, 4 * H),
        "W_hh": W_hh,
        "b": b,
        "W1": _glorot(rng, H, n_dense),
        "b1": np.zeros(n_dense),
        "W2": _glorot(rng, n_dense, 2),
        "b2": np.zeros(2),
    }
    return PolicyNetwork(params, sigma)


def _forward(net: PolicyNetwork, times):
    p = net.params
    x = np.asarray(times, dtype=float).reshape(len(times), -1)
    if x.shape[0] > 1 and np.any(np.diff(x[:, 0]) <= 0):
        raise ValueError("times must be strictly increasing")
    if not all(np.all(np.isfinite(v)) for v in p.values()):
        raise FloatingPointError("network has non-finite parameters")
    n, H = x.shape[0], net.n_units
    hs = np.zeros((n + 1, H))
    cs = np.zeros((n + 1, H))
    gates = np.zeros((n, 4 * H))
    for t in range(n):
        z = x[t] @ p["W_ih"] + hs[t] @ p["W_hh"] + p["b"]
        a = np.empty_like(z)
        a[: 3 * H] = _sigmoid(z[: 3 * H])
        a[3 * H:] = np.tanh(z[3 * H:])
        i, f, o, g = a[:H], a[H:2 * H], a[2 * H:3 * H], a[3 * H:]
        cs[t + 1] = f * cs[t] + i * g
        hs[t + 1] = o * np.tanh(cs[t + 1])
        gates[t] = a
    u = np.tanh(hs[1:] @ p["W1"] + p["b1"])
    mu = np.tanh(u @ p["W2"] + p["b2"])
    return mu, {"x": x, "hs": hs, "cs": cs, "gates": gates, "u": u, "mu": mu}


def lstm_forward(net: PolicyNetwork, times) -> np.ndarray:
    """Gaussian means, shape ``(n_steps, 2)``, for the given input times."""
    return _forward(net, times)[0]


def lstm_backward(net: PolicyNetwork, cache: dict, d_mu: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss given ``dLoss/dmu`` of shape ``(n_steps, 2)``."""
    p = net.params
    H = net.n_units
    x, hs, cs, gates, u, mu = (cache[k] for k in ("x", "hs", "cs", "gates", "u", "mu"))
    n = x.shape[0]
    grads = {k: np.zeros_like(v) for k, v in p.items()}

    dz2 = d_mu * (1.0 - mu**2)
    grads["W2"] = u.T @ dz2
    grads["b2"] = dz2.sum(axis=0)
    dz1 = (dz2 @ p["W2"].T) * (1.0 - u**2)
    grads["W1"] = hs[1:].T @ dz1
    grads["b1"] = dz1.sum(axis=0)
    dh_out = dz1 @ p["W1"].T

    dh_next = np.zeros(H)
    dc_next = np.zeros(H)
    for t in reversed(range(n)):
        a = gates[t]
        i, f, o, g = a[:H], a[H:2 * H], a[2 * H:3 * H], a[3 * H:]
        tc = np.tanh(cs[t + 1])
        dh = dh_out[t] + dh_next
        dc = dc_next + dh * o * (1.0 - tc**2)
        dz = np.concatenate([
            dc * g * i * (1.0 - i),
            dc * cs[t] * f * (1.0 - f),
            dh * tc * o * (1.0 - o),
            dc * i * (1.0 - g**2),
        ])
        grads["W_ih"] += np.outer(x[t], dz)
        grads["W_hh"] += np.outer(hs[t], dz)
        grads["b"] += dz
        dh_next = p["W_hh"] @ dz
        dc_next = dc * f
    return grads


def sample_actions(means, sigma, rng: np.random.Generator, n_batch: int | None = None) -> np.ndarray:
    """Draw ``Normal(means, sigma)`` and clip to ``[-1, 1]``.

    With ``n_batch`` the result has a leading batch axis.
    """
    means = np.asarray(means, dtype=float)
    shape = means.shape if n_batch is None else (n_batch, *means.shape)
    noise = rng.standard_normal(shape) * np.asarray(sigma, dtype=float)
    return np.clip(means + noise, -1.0, 1.0)


def _advantages(rewards):
    rewards = np.asarray(rewards, dtype=float)
    if rewards.size == 0:
        raise ValueError("empty batch")
    return rewards - rewards.mean()


def reinforce_loss(rewards, actions, means, sigma) -> float:
    """``sum_j (R_j - b) |a_j - mu|^2 / (2 sigma^2)`` with ``b`` the batch-mean reward.

    ``actions`` has shape ``(n_batch, n_steps, 2)``; ``sigma`` is per action
    component.
    """
    adv = _advantages(rewards)
    sq = (np.asarray(actions) - np.asarray(means)) ** 2 / (2.0 * np.asarray(sigma, dtype=float) ** 2)
    return float(np.sum(adv[:, None, None] * sq))


def reinforce_grad_means(rewards, actions, means, sigma) -> np.ndarray:
    """Derivative of :func:`reinforce_loss` with respect to the shared means."""
    adv = _advantages(rewards)
    diff = np.asarray(actions) - np.asarray(means)
    return -np.sum(adv[:, None, None] * diff, axis=0) / np.asarray(sigma, dtype=float) ** 2


@dataclass
class TrainConfig:
    """Hyperparameters for :func:`train`. ``sink_rate=None`` means ``10 / T``."""

    n_batch: int = 50
    n_epochs: int = 350
    n_steps: int = 40
    T: float = 40.0
    ranges: tuple[float, float] = (14.0, 0.2)
    sigma: tuple[float, float] = (0.07, 0.07)
    sink_rate: float | None = None
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    n_units: int = 50
    n_dense: int = 30
    init_scale: float = 0.1
    init_scheme: str = "uniform"

    def __post_init__(self):
        self.ranges = tuple(float(r) for r in self.ranges)
        self.sigma = tuple(float(s) for s in self.sigma)
        if self.sink_rate is None:
            self.sink_rate = 10.0 / self.T
        if self.n_batch < 1 or self.n_epochs < 0 or self.n_steps < 1:
            raise ValueError("n_batch and n_steps must be >= 1, n_epochs >= 0")
        if self.sink_rate < 0 or self.T <= 0:
            raise ValueError("sink_rate must be >= 0 and T > 0")

    @classmethod
    def restricted(cls, **kw) -> "TrainConfig":
        """Narrow two-photon range at ``Omega_0 T = 40``."""
        base = dict(n_batch=50, n_epochs=350, n_steps=40, T=40.0, ranges=(14.0, 0.2), sigma=(0.07, 0.07),
                    learning_rate=3e-3)
        return cls(**{**base, **kw})

    @classmethod
    def wide(cls, **kw) -> "TrainConfig":
        """Symmetric ``[-50, 50]`` ranges at ``Omega_0 T = 20``."""
        base = dict(n_batch=100, n_epochs=350, n_steps=20, T=20.0, ranges=(50.0, 50.0), sigma=(0.001, 0.001))
        return cls(**{**base, **kw})

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["ranges"] = list(self.ranges)
        d["sigma"] = list(self.sigma)
        return d


@dataclass
class LearningCurve:
    mean_reward: list[float] = field(default_factory=list)
    max_reward: list[float] = field(default_factory=list)
    baseline: list[float] = field(default_factory=list)
    greedy_reward: list[float] = field(default_factory=list)

    def __len__(self):
        return len(self.mean_reward)

    def rows(self):
        for i in range(len(self)):
            yield i, self.mean_reward[i], self.max_reward[i], self.baseline[i], self.greedy_reward[i]


@dataclass
class TrainResult:
    network: PolicyNetwork
    curve: LearningCurve
    best_schedule: PiecewiseConstant
    best_reward: float
    best_actions: np.ndarray
    best_epoch: int


class Adam:
    """Adam over a dict of parameter arrays, updated in place."""

    def __init__(self, params: dict, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for k, g in grads.items():
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            params[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)

    def state_dict(self) -> dict:
        return {"t": self.t, "m": {k: v.tolist() for k, v in self.m.items()},
                "v": {k: v.tolist() for k, v in self.v.items()}}


def step_times(n_steps: int) -> np.ndarray:
    """Normalized start times ``i / n_steps`` of each interval."""
    return np.arange(n_steps) / n_steps


def rollout_rewards(actions, config: TrainConfig) -> np.ndarray:
    """``rho_ff(T)`` for a batch of normalized action sequences ``(n_batch, n_steps, 2)``."""
    a = np.asarray(actions, dtype=float)
    values = a * np.asarray(config.ranges)
    pops = pwc_final_populations(values, config.T, config.sink_rate)
    rewards = pops[:, F]
    if not np.all(np.isfinite(rewards)):
        raise FloatingPointError("propagation produced non-finite rewards")
    return rewards


def rollout_reward(actions, config: TrainConfig) -> float:
    """Reward of one normalized action sequence ``(n_steps, 2)``."""
    return float(rollout_rewards(np.asarray(actions)[None], config)[0])


def train(config: TrainConfig, network: PolicyNetwork | None = None, progress=None) -> TrainResult:
    """Run REINFORCE with a batch-mean baseline for ``config.n_epochs`` epochs.

    Each epoch draws one batch of action sequences around the current means,
    scores them, and takes one Adam step. The greedy schedule (actions equal
    to the means) is scored every epoch and the best one is returned.
    ``progress`` is called as ``progress(epoch, curve)`` after each epoch.
    """
    rng = np.random.default_rng(config.seed)
    net = network.copy() if network is not None else init_network(
        config.n_units, config.n_dense, config.sigma, rng, config.init_scale,
        scheme=config.init_scheme)
    adam = Adam(net.params, config.learning_rate, config.beta1, config.beta2, config.epsilon)
    times = step_times(config.n_steps)
    curve = LearningCurve()
    best = (-math.inf, None, -1)

    for epoch in range(config.n_epochs):
        mu, cache = _forward(net, times)
        greedy = rollout_reward(mu, config)
        if greedy > best[0]:
            best = (greedy, mu.copy(), epoch)
        actions = sample_actions(mu, net.sigma, rng, config.n_batch)
        rewards = rollout_rewards(actions, config)
        loss = reinforce_loss(rewards, actions, mu, net.sigma)
        if not math.isfinite(loss):
            raise FloatingPointError(f"non-finite loss at epoch {epoch}")
        grads = lstm_backward(net, cache, reinforce_grad_means(rewards, actions, mu, net.sigma))
        adam.step(net.params, grads)
        curve.mean_reward.append(float(rewards.mean()))
        curve.max_reward.append(float(rewards.max()))
        curve.baseline.append(float(rewards.mean()))
        curve.greedy_reward.append(greedy)
        log.debug("epoch %d mean %.6f max %.6f greedy %.6f", epoch, rewards.mean(), rewards.max(), greedy)
        if progress is not None:
            progress(epoch, curve)

    mu = lstm_forward(net, times)
    greedy = rollout_reward(mu, config)
    if greedy > best[0]:
        best = (greedy, mu.copy(), config.n_epochs)
    reward, best_actions, best_epoch = best
    return TrainResult(net, curve, pwc_from_actions(best_actions, config.ranges), reward,
                       best_actions, best_epoch)


def save_checkpoint(path, result_or_net, config: TrainConfig, epoch: int | None = None,
                    best_reward: float | None = None, best_actions=None) -> None:
    """Write a JSON checkpoint; floats are stored at full double precision."""
    if isinstance(result_or_net, TrainResult):
        net = result_or_net.network
        epoch = config.n_epochs if epoch is None else epoch
        best_reward = result_or_net.best_reward
        best_actions = result_or_net.best_actions
    else:
        net = result_or_net
    doc = {
        "version": CHECKPOINT_VERSION,
        "config": config.to_dict(),
        "epoch": epoch,
        "seed": config.seed,
        "sigma": list(net.sigma),
        "parameters": {k: {"shape": list(net.params[k].shape), "data": net.params[k].ravel().tolist()}
                       for k in PARAM_NAMES},
        "best_reward": best_reward,
        "best_actions": None if best_actions is None else np.asarray(best_actions).tolist(),
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def load_checkpoint(path) -> dict:
    """Read a checkpoint; returns a dict with ``network``, ``config`` and metadata."""
    doc = json.loads(Path(path).read_text())
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')!r}")
    params = {k: np.array(v["data"], dtype=float).reshape(v["shape"]) for k, v in doc["parameters"].items()}
    return {
        "network": PolicyNetwork(params, tuple(doc["sigma"])),
        "config": TrainConfig(**doc["config"]),
        "epoch": doc["epoch"],
        "seed": doc["seed"],
        "best_reward": doc["best_reward"],
        "best_actions": None if doc["best_actions"] is None else np.array(doc["best_actions"]),
    }
