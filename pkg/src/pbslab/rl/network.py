"""Dueling feed-forward Q network with hand-written backpropagation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class ShapeMismatch(ValueError):
    pass


def _relu(x):
    return np.maximum(x, 0.0)


@dataclass
class DuelingNet:
    """Shared ReLU trunk feeding a value stream and an advantage stream.

    ``Q(s, a) = V(s) + A(s, a) - mean_a' A(s, a')``. Parameters are kept as a
    flat list ``[W0, b0, W1, b1, ...]`` in the order trunk, value stream,
    advantage stream, so optimisers and checkpoints can treat them uniformly.
    """

    input_width: int
    n_actions: int
    hidden: tuple[int, ...] = (64,) * 6
    head_hidden: tuple[int, ...] = ()
    params: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        self.hidden = tuple(self.hidden)
        self.head_hidden = tuple(self.head_hidden)
        if not self.hidden:
            raise ValueError("the trunk needs at least one hidden layer")
        shapes = self.layer_shapes()
        if self.params:
            if [p.shape for p in self.params] != [s for pair in shapes for s in ((pair[0], pair[1]), (pair[1],))]:
                raise ShapeMismatch("parameter shapes do not match the layout")
            self.params = [np.asarray(p, dtype=np.float64) for p in self.params]

    def layer_shapes(self) -> list[tuple[int, int]]:
        trunk = [self.input_width, *self.hidden]
        value = [self.hidden[-1], *self.head_hidden, 1]
        adv = [self.hidden[-1], *self.head_hidden, self.n_actions]
        out = []
        for sizes in (trunk, value, adv):
            out.extend(zip(sizes[:-1], sizes[1:]))
        return out

    @property
    def n_trunk(self) -> int:
        return len(self.hidden)

    @property
    def n_head(self) -> int:
        return len(self.head_hidden) + 1

    @classmethod
    def init(cls, input_width: int, n_actions: int, hidden: Sequence[int] = (64,) * 6,
             head_hidden: Sequence[int] = (), rng: Optional[np.random.Generator] = None) -> "DuelingNet":
        rng = rng if rng is not None else np.random.default_rng(0)
        net = cls(input_width, n_actions, tuple(hidden), tuple(head_hidden))
        params = []
        for fan_in, fan_out in net.layer_shapes():
            params.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
            params.append(np.zeros(fan_out))
        net.params = params
        return net

    def copy(self) -> "DuelingNet":
        return DuelingNet(self.input_width, self.n_actions, self.hidden, self.head_hidden,
                          [p.copy() for p in self.params])

    def _layers(self):
        ws = list(zip(self.params[0::2], self.params[1::2]))
        t, h = self.n_trunk, self.n_head
        return ws[:t], ws[t:t + h], ws[t + h:]

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[-1] != self.input_width:
            raise ShapeMismatch(f"expected input width {self.input_width}, got {x.shape[-1]}")
        return x

    def forward(self, x: np.ndarray, keep: bool = False):
        """Return ``(Q, V, A)`` for a batch; with ``keep`` also the activation cache."""
        x = self._check(x)
        trunk, vstream, astream = self._layers()
        cache = {"trunk": [], "v": [], "a": []}
        h = x
        for W, b in trunk:
            z = h @ W + b
            cache["trunk"].append((h, z))
            h = _relu(z)
        feats = h
        outs = []
        for name, stream in (("v", vstream), ("a", astream)):
            h = feats
            for li, (W, b) in enumerate(stream):
                z = h @ W + b
                cache[name].append((h, z))
                h = _relu(z) if li < len(stream) - 1 else z
            outs.append(h)
        v, a = outs
        q = v + a - a.mean(axis=1, keepdims=True)
        if keep:
            return q, v[:, 0], a, cache
        return q, v[:, 0], a

    def q_values(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache: dict, dq: np.ndarray) -> list[np.ndarray]:
        """Gradients of a scalar loss w.r.t. every parameter, given dLoss/dQ."""
        trunk, vstream, astream = self._layers()
        dv = dq.sum(axis=1, keepdims=True)
        da = dq - dq.mean(axis=1, keepdims=True)
        grads: dict[str, list] = {}
        dfeats = 0.0
        for name, stream, dout in (("v", vstream, dv), ("a", astream, da)):
            g = []
            delta = dout
            for li in range(len(stream) - 1, -1, -1):
                h_in, z = cache[name][li]
                if li < len(stream) - 1:
                    delta = delta * (z > 0)
                W, _ = stream[li]
                g.append((h_in.T @ delta, delta.sum(axis=0)))
                delta = delta @ W.T
            grads[name] = g[::-1]
            dfeats = dfeats + delta
        g = []
        delta = dfeats
        for li in range(len(trunk) - 1, -1, -1):
            h_in, z = cache["trunk"][li]
            delta = delta * (z > 0)
            W, _ = trunk[li]
            g.append((h_in.T @ delta, delta.sum(axis=0)))
            if li:
                delta = delta @ W.T
        grads["trunk"] = g[::-1]
        flat = []
        for name in ("trunk", "v", "a"):
            for gw, gb in grads[name]:
                flat.extend((gw, gb))
        return flat

    def loss_and_grads(self, x: np.ndarray, actions: np.ndarray, targets: np.ndarray):
        """Mean squared error between ``targets`` and ``Q(x, actions)`` with its gradients."""
        q, _, _, cache = self.forward(x, keep=True)
        rows = np.arange(q.shape[0])
        err = q[rows, actions] - targets
        loss = float(np.mean(err ** 2))
        dq = np.zeros_like(q)
        dq[rows, actions] = 2.0 * err / q.shape[0]
        return loss, self.backward(cache, dq)

    def to_json(self) -> dict:
        return {
            "input_width": self.input_width,
            "n_actions": self.n_actions,
            "hidden": list(self.hidden),
            "head_hidden": list(self.head_hidden),
            "params": [p.tolist() for p in self.params],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DuelingNet":
        return cls(int(obj["input_width"]), int(obj["n_actions"]), tuple(obj["hidden"]),
                   tuple(obj["head_hidden"]), [np.asarray(p, dtype=np.float64) for p in obj["params"]])


class Adam:
    """Adaptive moment estimation over a list of parameter arrays (updated in place)."""

    def __init__(self, params: list[np.ndarray], lr: float = 1e-4, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def gradient_check(net: DuelingNet, x: np.ndarray, actions: np.ndarray, targets: np.ndarray,
                   h: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    Relative error is ``|g_a - g_n| / max(|g_a| + |g_n|, 1e-12)`` per scalar.
    """
    _, analytic = net.loss_and_grads(x, actions, targets)
    worst = 0.0
    for p, ga in zip(net.params, analytic):
        flat = p.reshape(-1)
        gflat = ga.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            lp = net.loss_and_grads(x, actions, targets)[0]
            flat[i] = old - h
            lm = net.loss_and_grads(x, actions, targets)[0]
            flat[i] = old
            gn = (lp - lm) / (2 * h)
            rel = abs(gflat[i] - gn) / max(abs(gflat[i]) + abs(gn), 1e-12)
            worst = max(worst, rel)
    return worst
