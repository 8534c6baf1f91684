"""Q-network over scene features, with its own backprop and optimizer.

A small fully connected network maps the state vector to one action value
per compass direction. Training is episodic Q-learning with an experience
replay buffer and a linearly annealed exploration rate; moving costs -1 per
step and reaching a grasp ends the episode at 0, so shorter searches score
higher.
"""
from __future__ import annotations

from collections import OrderedDict

import numpy as np

from ..config import RunConfig
from ..sim import ExplorationSession, GraspSimulator
from ..viewsphere import DIRECTION_ORDER, neighbor_pose
from .features import STATE_DIM_FN, state_vector

__all__ = ["QNetwork", "gradient_check", "train_q"]


class QNetwork:
    """Fully connected ReLU network with a linear output layer."""

    def __init__(self, sizes, seed: int = 0):
        self.sizes = tuple(int(s) for s in sizes)
        rng = np.random.default_rng(np.random.SeedSequence([seed, 9001]))
        self.W = []
        self.b = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            scale = np.sqrt(2.0 / fan_in)
            self.W.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
            self.b.append(np.zeros(fan_out))
        self._adam_m = [np.zeros_like(w) for w in self.W] + [np.zeros_like(b) for b in self.b]
        self._adam_v = [np.zeros_like(w) for w in self.W] + [np.zeros_like(b) for b in self.b]
        self._adam_t = 0

    def forward(self, X: np.ndarray) -> np.ndarray:
        h = np.atleast_2d(np.asarray(X, dtype=float))
        last = len(self.W) - 1
        for i, (w, b) in enumerate(zip(self.W, self.b)):
            h = h @ w + b
            if i != last:
                h = np.maximum(h, 0.0)
        return h

    def _forward_cache(self, X: np.ndarray):
        h = np.atleast_2d(np.asarray(X, dtype=float))
        acts = [h]
        last = len(self.W) - 1
        for i, (w, b) in enumerate(zip(self.W, self.b)):
            h = h @ w + b
            if i != last:
                h = np.maximum(h, 0.0)
            acts.append(h)
        return acts

    def _loss_and_grads(self, X, actions, targets):
        """0.5 * mean squared TD error on the chosen actions, plus gradients."""
        acts = self._forward_cache(X)
        out = acts[-1]
        n = out.shape[0]
        idx = np.arange(n)
        diff = out[idx, actions] - targets
        loss = 0.5 * float(np.mean(diff * diff))
        dout = np.zeros_like(out)
        dout[idx, actions] = diff / n
        gW = [np.zeros_like(w) for w in self.W]
        gb = [np.zeros_like(b) for b in self.b]
        delta = dout
        for i in range(len(self.W) - 1, -1, -1):
            gW[i] = acts[i].T @ delta
            gb[i] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.W[i].T) * (acts[i] > 0.0)
        return loss, gW, gb

    def loss(self, X, actions, targets) -> float:
        out = self.forward(X)
        diff = out[np.arange(out.shape[0]), actions] - targets
        return 0.5 * float(np.mean(diff * diff))

    def train_step(self, X, actions, targets, lr: float) -> float:
        loss, gW, gb = self._loss_and_grads(X, np.asarray(actions), np.asarray(targets, dtype=float))
        self._adam_t += 1
        b1, b2, eps = 0.9, 0.999, 1e-8
        t = self._adam_t
        params = self.W + self.b
        grads = gW + gb
        for p, g, m, v in zip(params, grads, self._adam_m, self._adam_v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * (g * g)
            mhat = m / (1 - b1**t)
            vhat = v / (1 - b2**t)
            p -= lr * mhat / (np.sqrt(vhat) + eps)
        return loss

    def parameters(self):
        return self.W + self.b


def gradient_check(
    net: QNetwork,
    X: np.ndarray,
    actions: np.ndarray,
    targets: np.ndarray,
    n_samples: int = 200,
    eps: float = 1e-6,
    seed: int = 0,
) -> float:
    """Max relative error between backprop and central finite differences.

    Samples parameter entries across every layer; double precision keeps
    the finite-difference noise floor far below the tolerance this is
    checked against.
    """
    loss, gW, gb = net._loss_and_grads(X, np.asarray(actions), np.asarray(targets, dtype=float))
    del loss
    analytic = gW + gb
    params = net.parameters()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_samples):
        li = int(rng.integers(len(params)))
        p = params[li]
        flat = int(rng.integers(p.size))
        orig = p.flat[flat]
        p.flat[flat] = orig + eps
        lp = net.loss(X, actions, targets)
        p.flat[flat] = orig - eps
        lm = net.loss(X, actions, targets)
        p.flat[flat] = orig
        numeric = (lp - lm) / (2 * eps)
        ana = analytic[li].flat[flat]
        denom = max(abs(numeric) + abs(ana), 1e-8)
        worst = max(worst, abs(numeric - ana) / denom)
    return worst


class _Replay:
    """Fixed-capacity ring buffer of transitions."""

    def __init__(self, capacity: int, state_dim: int):
        self.capacity = capacity
        self.s = np.zeros((capacity, state_dim))
        self.a = np.zeros(capacity, dtype=int)
        self.r = np.zeros(capacity)
        self.s2 = np.zeros((capacity, state_dim))
        self.done = np.zeros(capacity, dtype=bool)
        self.valid2 = np.zeros((capacity, 8), dtype=bool)
        self.size = 0
        self._next = 0

    def push(self, s, a, r, s2, done, valid2):
        i = self._next
        self.s[i] = s
        self.a[i] = a
        self.r[i] = r
        self.s2[i] = s2
        self.done[i] = done
        self.valid2[i] = valid2
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch: int, rng: np.random.Generator):
        idx = rng.integers(self.size, size=batch)
        return (
            self.s[idx],
            self.a[idx],
            self.r[idx],
            self.s2[idx],
            self.done[idx],
            self.valid2[idx],
        )


def _valid_mask(pose, vcfg) -> np.ndarray:
    return np.array([neighbor_pose(pose, d, vcfg) is not None for d in DIRECTION_ORDER])


def train_q(
    cfg: RunConfig,
    objects,
    seed: int = 0,
    episodes: int | None = None,
    progress=None,
    sim_cache_cap: int = 24,
):
    """Train a Q-network by exploring random poses of the given objects.

    Returns (network, history) where history tracks per-episode steps,
    success, and the exploration rate. Objects cycle round-robin; the pose
    is a fresh random rotation each episode.
    """
    ml = cfg.ml
    n_episodes = episodes if episodes is not None else ml.q_episodes
    state_dim = STATE_DIM_FN(ml.haf_grid_n)
    net = QNetwork((state_dim,) + tuple(ml.q_hidden) + (8,), seed=seed)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 31337]))
    replay = _Replay(ml.q_replay_capacity, state_dim)
    sims: OrderedDict[tuple[str, int], GraspSimulator] = OrderedDict()
    history = {"steps": [], "success": [], "epsilon": []}
    anneal = max(1, int(n_episodes * ml.q_eps_fraction))

    for ep in range(n_episodes):
        frac = min(1.0, ep / anneal)
        eps = ml.q_eps_start + (ml.q_eps_end - ml.q_eps_start) * frac
        name = objects[ep % len(objects)]
        rot = int(rng.integers(0, 360))
        key = (name, rot)
        sim = sims.get(key)
        if sim is None:
            sim = GraspSimulator(name, rot, cfg)
            sims[key] = sim
            if len(sims) > sim_cache_cap:
                sims.popitem(last=False)
        else:
            sims.move_to_end(key)

        session = ExplorationSession(sim)
        while not session.succeeded and session.remaining_steps > 0:
            s = state_vector(session.model, session.pose, ml.haf_grid_n, ml.haf_region_m)
            valid = _valid_mask(session.pose, cfg.viewsphere)
            if rng.random() < eps:
                choices = np.flatnonzero(valid)
                a = int(choices[rng.integers(len(choices))])
            else:
                q = net.forward(s)[0]
                a = int(np.argmax(np.where(valid, q, -np.inf)))
            target_pose = neighbor_pose(session.pose, DIRECTION_ORDER[a], cfg.viewsphere)
            assert target_pose is not None
            session.move_to(target_pose, 1)
            r = 0.0 if session.succeeded else -1.0
            done = session.succeeded or session.remaining_steps == 0
            s2 = state_vector(session.model, session.pose, ml.haf_grid_n, ml.haf_region_m)
            replay.push(s, a, r, s2, done, _valid_mask(session.pose, cfg.viewsphere))
            if replay.size >= ml.q_batch_size:
                bs, ba, br, bs2, bdone, bvalid2 = replay.sample(ml.q_batch_size, rng)
                q2 = net.forward(bs2)
                q2 = np.where(bvalid2, q2, -np.inf)
                boot = np.max(q2, axis=1)
                boot[~np.isfinite(boot)] = 0.0
                targets = br + np.where(bdone, 0.0, ml.q_gamma * boot)
                net.train_step(bs, ba, targets, ml.q_lr)

        history["steps"].append(session.steps_used)
        history["success"].append(bool(session.succeeded))
        history["epsilon"].append(eps)
        if progress is not None:
            progress(ep + 1, n_episodes, history)
    return net, history
