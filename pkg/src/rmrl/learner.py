"""Actor-critic MLP with hand-written backprop, GAE and a clipped-surrogate PPO update."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

CHECKPOINT_VERSION = 1


@dataclass
class OptimConfig:
    gamma: float = 0.99
    gae_tau: float = 0.95
    clip: float = 0.1
    epochs: int = 10
    minibatches: int = 4
    lr: float = 3e-4
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    grad_norm_clip: float = 0.5
    rollout_length: int = 200
    hidden: tuple = (64, 64)
    adam_betas: tuple = (0.9, 0.999)
    adam_eps: float = 1e-8

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        self.adam_betas = tuple(float(b) for b in self.adam_betas)
        for name in ("gamma", "gae_tau"):
            if not 0 < getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in (0, 1]")
        if not 0 <= self.clip < 1:
            raise ValueError("clip must lie in [0, 1)")
        if self.lr <= 0 or self.grad_norm_clip <= 0:
            raise ValueError("lr and grad_norm_clip must be positive")
        if min(self.epochs, self.minibatches, self.rollout_length) < 1:
            raise ValueError("epochs, minibatches and rollout_length must be positive")
        if len(self.hidden) != 2 or min(self.hidden) < 1:
            raise ValueError("hidden must name two positive layer widths")


class PolicyNet:
    """Two tanh hidden layers feeding a categorical head and a scalar value head.

    All parameters live in one flat float64 vector ``theta`` so the optimizer,
    checkpoints and finite-difference checks see a single array.
    """

    def __init__(self, obs_dim: int = 7, n_actions: int = 6, hidden=(64, 64), seed=None, theta=None):
        self.obs_dim, self.n_actions = int(obs_dim), int(n_actions)
        self.hidden = tuple(int(h) for h in hidden)
        h1, h2 = self.hidden
        self.shapes = {
            "W1": (self.obs_dim, h1), "b1": (h1,),
            "W2": (h1, h2), "b2": (h2,),
            "Wpi": (h2, self.n_actions), "bpi": (self.n_actions,),
            "Wv": (h2, 1), "bv": (1,),
        }
        self._slices = []
        offset = 0
        for name, shape in self.shapes.items():
            n = int(np.prod(shape))
            self._slices.append((name, offset, offset + n, shape))
            offset += n
        self.size = offset
        if theta is None:
            theta = self._init(np.random.default_rng(seed))
        self.theta = np.array(theta, dtype=np.float64)
        if self.theta.shape != (self.size,):
            raise ValueError(f"expected {self.size} parameters, got {self.theta.shape}")

    def _init(self, rng: np.random.Generator) -> np.ndarray:
        scale = {"W1": 1.0, "W2": 1.0, "Wpi": 0.01, "Wv": 1.0}
        parts = []
        for name, shape in self.shapes.items():
            if name.startswith("b"):
                parts.append(np.zeros(shape))
            else:
                parts.append(rng.standard_normal(shape) * scale[name] / np.sqrt(shape[0]))
        return np.concatenate([p.ravel() for p in parts])

    def unpack(self, theta=None) -> dict:
        theta = self.theta if theta is None else theta
        return {name: theta[a:b].reshape(shape) for name, a, b, shape in self._slices}

    def forward(self, obs, theta=None):
        p = self.unpack(theta)
        x = np.asarray(obs, dtype=np.float64)
        h1 = np.tanh(x @ p["W1"] + p["b1"])
        h2 = np.tanh(h1 @ p["W2"] + p["b2"])
        logits = h2 @ p["Wpi"] + p["bpi"]
        value = h2 @ p["Wv"][:, 0] + p["bv"][0]
        return logits, value, (x, h1, h2)

    def checksum(self) -> str:
        import hashlib

        return hashlib.sha256(self.theta.tobytes()).hexdigest()


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def _check_obs(obs, net: PolicyNet) -> np.ndarray:
    obs = np.atleast_2d(np.asarray(obs, dtype=np.float64))
    if obs.shape[1] != net.obs_dim:
        raise ValueError(f"observation dimension {obs.shape[1]} does not match network input {net.obs_dim}")
    if not np.all(np.isfinite(obs)):
        raise ValueError("non-finite observation")
    return obs


def act(net: PolicyNet, obs, rng: np.random.Generator):
    """Sample one action per row; returns ``(actions, log_probs, values)``."""
    obs = _check_obs(obs, net)
    logits, value, _ = net.forward(obs)
    logp = log_softmax(logits)
    cdf = np.cumsum(np.exp(logp), axis=-1)
    u = rng.random(obs.shape[0]) * cdf[:, -1]
    actions = np.minimum((cdf <= u[:, None]).sum(axis=-1), net.n_actions - 1)
    return actions, logp[np.arange(len(actions)), actions], value


def greedy(net: PolicyNet, obs) -> np.ndarray:
    logits, _, _ = net.forward(_check_obs(obs, net))
    return np.argmax(logits, axis=-1)


def value_of(net: PolicyNet, obs) -> np.ndarray:
    return net.forward(_check_obs(obs, net))[1]


# ---------------------------------------------------------------------------
# Advantage estimation


def compute_gae(rewards, values, next_values, terminals, boundaries, gamma: float, tau: float):
    """Generalized advantage estimation over a ``(T, ...)`` rollout.

    ``next_values[t]`` is the value of the state that follows step ``t`` (for a
    truncated phase, the continuing state under the old goal). ``terminals``
    zero the bootstrap; ``boundaries`` (a superset of terminals) stop the
    advantage recursion from leaking across phases. Returns raw advantages
    and ``returns = advantages + values``.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    next_values = np.asarray(next_values, dtype=np.float64)
    live = 1.0 - np.asarray(terminals, dtype=np.float64)
    carry = 1.0 - np.asarray(boundaries, dtype=np.float64)
    adv = np.zeros_like(rewards)
    last = np.zeros_like(rewards[0])
    for t in range(rewards.shape[0] - 1, -1, -1):
        delta = rewards[t] + gamma * next_values[t] * live[t] - values[t]
        last = delta + gamma * tau * carry[t] * last
        adv[t] = last
    return adv, adv + values


def normalize(adv: np.ndarray) -> np.ndarray:
    if adv.size < 2:
        return adv - adv.mean()
    return (adv - adv.mean()) / (adv.std() + 1e-8)


# ---------------------------------------------------------------------------
# Loss and exact gradient


@dataclass
class Minibatch:
    obs: np.ndarray
    actions: np.ndarray
    old_log_probs: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray


def ppo_loss(net: PolicyNet, theta, mb: Minibatch, cfg: OptimConfig, with_grad: bool = True):
    """Clipped surrogate + value regression - entropy bonus, averaged over the minibatch.

    ``mb.advantages`` are used as given (normalize before calling). Returns
    ``(loss, grad, stats)``; ``grad`` is None when ``with_grad`` is false.
    """
    logits, value, (x, h1, h2) = net.forward(mb.obs, theta)
    n = logits.shape[0]
    rows = np.arange(n)
    logp_all = log_softmax(logits)
    probs = np.exp(logp_all)
    logp = logp_all[rows, mb.actions]
    ratio = np.exp(logp - mb.old_log_probs)
    adv = mb.advantages
    lo, hi = 1.0 - cfg.clip, 1.0 + cfg.clip
    surr1 = ratio * adv
    surr2 = np.clip(ratio, lo, hi) * adv
    policy_loss = -np.mean(np.minimum(surr1, surr2))
    value_err = value - mb.returns
    value_loss = np.mean(value_err**2)
    entropy_each = -np.sum(probs * logp_all, axis=-1)
    entropy = np.mean(entropy_each)
    loss = policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * entropy
    stats = {
        "loss": float(loss), "policy_loss": float(policy_loss), "value_loss": float(value_loss),
        "entropy": float(entropy), "clip_frac": float(np.mean((ratio < lo) | (ratio > hi))),
        "approx_kl": float(np.mean(mb.old_log_probs - logp)),
    }
    if not with_grad:
        return float(loss), None, stats

    # the unclipped branch carries gradient when it is the strict minimum or the ratio is strictly inside the clip range
    active = (surr1 < surr2) | ((ratio > lo) & (ratio < hi))
    g_logp = -(ratio * adv * active) / n
    onehot = np.zeros_like(probs)
    onehot[rows, mb.actions] = 1.0
    d_logits = g_logp[:, None] * (onehot - probs)
    d_logits += (cfg.entropy_coef / n) * probs * (logp_all + entropy_each[:, None])
    d_value = (2.0 * cfg.value_coef / n) * value_err

    p = net.unpack(theta)
    grads = {}
    grads["Wpi"] = h2.T @ d_logits
    grads["bpi"] = d_logits.sum(axis=0)
    grads["Wv"] = h2.T @ d_value[:, None]
    grads["bv"] = np.array([d_value.sum()])
    d_h2 = d_logits @ p["Wpi"].T + d_value[:, None] @ p["Wv"].T
    d_z2 = d_h2 * (1.0 - h2**2)
    grads["W2"] = h1.T @ d_z2
    grads["b2"] = d_z2.sum(axis=0)
    d_z1 = (d_z2 @ p["W2"].T) * (1.0 - h1**2)
    grads["W1"] = x.T @ d_z1
    grads["b1"] = d_z1.sum(axis=0)
    grad = np.concatenate([grads[name].ravel() for name in net.shapes])
    return float(loss), grad, stats


class Adam:
    def __init__(self, size: int, lr: float = 3e-4, betas=(0.9, 0.999), eps: float = 1e-8):
        self.lr, self.betas, self.eps = lr, tuple(betas), eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, theta: np.ndarray, grad: np.ndarray) -> np.ndarray:
        b1, b2 = self.betas
        self.t += 1
        self.m = b1 * self.m + (1 - b1) * grad
        self.v = b2 * self.v + (1 - b2) * grad * grad
        m_hat = self.m / (1 - b1**self.t)
        v_hat = self.v / (1 - b2**self.t)
        return theta - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def clip_grad_norm(grad: np.ndarray, max_norm: float):
    norm = float(np.linalg.norm(grad))
    if norm > max_norm:
        grad = grad * (max_norm / (norm + 1e-6))
    return grad, norm


class NonFiniteLoss(RuntimeError):
    pass


@dataclass
class RolloutBatch:
    """Experience of ``T`` steps from ``W`` workers, arrays shaped ``(T, W, ...)``."""

    obs: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    rewards: np.ndarray
    values: np.ndarray
    next_values: np.ndarray
    terminals: np.ndarray
    phase_ends: np.ndarray
    resets: np.ndarray

    def advantages(self, gamma: float, tau: float):
        return compute_gae(self.rewards, self.values, self.next_values, self.terminals, self.phase_ends, gamma, tau)


def ppo_update(net: PolicyNet, opt: Adam, batch: RolloutBatch, cfg: OptimConfig, rng: np.random.Generator):
    """Several epochs of shuffled-minibatch PPO on one rollout. Mutates ``net.theta``."""
    adv, returns = batch.advantages(cfg.gamma, cfg.gae_tau)
    obs = batch.obs.reshape(-1, batch.obs.shape[-1])
    actions = batch.actions.reshape(-1)
    old_logp = batch.log_probs.reshape(-1)
    adv, returns = adv.reshape(-1), returns.reshape(-1)
    n = obs.shape[0]
    stats = []
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for idx in np.array_split(order, cfg.minibatches):
            mb = Minibatch(obs[idx], actions[idx], old_logp[idx], normalize(adv[idx]), returns[idx])
            loss, grad, st = ppo_loss(net, net.theta, mb, cfg)
            if not (np.isfinite(loss) and np.all(np.isfinite(grad))):
                raise NonFiniteLoss(f"non-finite loss {loss} ({st})")
            grad, gnorm = clip_grad_norm(grad, cfg.grad_norm_clip)
            net.theta = opt.step(net.theta, grad)
            st["grad_norm"] = gnorm
            stats.append(st)
    return {k: float(np.mean([s[k] for s in stats])) for k in stats[0]}


# ---------------------------------------------------------------------------
# Checkpoints


def save_checkpoint(path, net: PolicyNet, opt: Optional[Adam], global_step: int, meta: Optional[dict] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays = {
        "version": np.array(CHECKPOINT_VERSION),
        "theta": net.theta,
        "arch": np.array([net.obs_dim, net.n_actions, *net.hidden]),
        "global_step": np.array(global_step, dtype=np.int64),
        "meta": np.array(json.dumps(meta or {}, sort_keys=True)),
    }
    if opt is not None:
        arrays.update(adam_m=opt.m, adam_v=opt.v, adam_t=np.array(opt.t))
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    return path


def load_checkpoint(path):
    """Returns ``(net, adam_state_or_None, global_step, meta)``."""
    with np.load(path, allow_pickle=False) as data:
        version = int(data["version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        obs_dim, n_actions, h1, h2 = (int(v) for v in data["arch"])
        net = PolicyNet(obs_dim, n_actions, (h1, h2), theta=data["theta"])
        adam = None
        if "adam_m" in data:
            adam = {"m": data["adam_m"].copy(), "v": data["adam_v"].copy(), "t": int(data["adam_t"])}
        return net, adam, int(data["global_step"]), json.loads(str(data["meta"]))
