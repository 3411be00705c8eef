"""Double & dueling DQN training and greedy inference for one grid configuration."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from ..grid import EscortAction, PbsState, apply_action, is_legal, legal_mask
from ..heuristics import Failed, semi_random_action
from ..instances import Instance, SeriesSpec, elimination_bound, regenerate
from ..plan import Plan
from .network import Adam, DuelingNet
from .replay import ReplayBuffer

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "pbslab-dueling-dqn/1"


class DivergenceDetected(RuntimeError):
    pass


def encode_state(state: PbsState, normalize: bool = False) -> np.ndarray:
    """Item coordinates then escort coordinates, ``(row, col)`` per entity."""
    coords = [c for p in state.items + state.escorts for c in p]
    v = np.asarray(coords, dtype=np.float64)
    if normalize:
        v[0::2] /= max(state.m - 1, 1)
        v[1::2] /= max(state.n - 1, 1)
    return v


def default_hidden(m: int, n: int) -> tuple[int, ...]:
    return (64,) * 6 if m * n <= 36 else (128,) * 8


@dataclass
class TrainConfig:
    episodes: int = 20000
    lr: float = 1e-4
    capacity: int = 1_000_000
    batch: int = 1000
    epsilon: tuple[float, float] = (1.0, 0.1)
    eta: tuple[float, float] = (0.7, 0.0)
    gamma: tuple[float, float] = (0.8, 0.98)
    target_sync: int = 200
    hidden: Optional[tuple[int, ...]] = None
    head_hidden: tuple[int, ...] = ()
    step_cap: Optional[int] = None
    normalize: bool = False
    seed: int = 0

    @staticmethod
    def schedule(bounds: Sequence[float], episode: int, total: int) -> float:
        """Linear interpolation from ``bounds[0]`` (first episode) to ``bounds[1]`` (last)."""
        frac = episode / max(total - 1, 1)
        return bounds[0] + (bounds[1] - bounds[0]) * frac

    def at(self, episode: int) -> tuple[float, float, float]:
        return (self.schedule(self.epsilon, episode, self.episodes),
                self.schedule(self.eta, episode, self.episodes),
                self.schedule(self.gamma, episode, self.episodes))

    @classmethod
    def from_json(cls, obj: dict) -> "TrainConfig":
        kw = dict(obj)
        for key in ("epsilon", "eta", "gamma", "hidden", "head_hidden"):
            if kw.get(key) is not None:
                kw[key] = tuple(kw[key])
        return cls(**kw)


@dataclass
class EpisodeMetrics:
    episode: int
    steps: int
    loss: float
    epsilon: float
    eta: float
    gamma: float
    solved: bool


def double_dqn_targets(online: DuelingNet, target: DuelingNet, r: np.ndarray, s_next: np.ndarray,
                       done: np.ndarray, gamma: float, mask_next: Optional[np.ndarray] = None) -> np.ndarray:
    """``r`` on terminal transitions, else ``r + gamma * Q_target(s', argmax_a Q_online(s', a))``.

    With ``mask_next`` the argmax only ranges over actions legal in ``s'``.
    Outputs for illegal actions never receive a training signal, so letting
    the argmax pick them feeds arbitrary values into every target.
    """
    q_online = online.q_values(s_next)
    if mask_next is not None and mask_next.shape[1] == q_online.shape[1]:
        q_online = np.where(mask_next, q_online, -np.inf)
    best = np.argmax(q_online, axis=1)
    q_next = target.q_values(s_next)[np.arange(len(best)), best]
    return np.where(done, r, r + gamma * q_next)


def series_sampler(spec: SeriesSpec) -> Callable[[np.random.Generator], PbsState]:
    def sample(rng: np.random.Generator) -> PbsState:
        return regenerate(spec, int(rng.integers(2 ** 62))).state()
    return sample


@dataclass
class Agent:
    """A trained network plus the grid shape it was trained for."""

    net: DuelingNet
    m: int
    n: int
    d: int
    e: int
    normalize: bool = False
    meta: dict = field(default_factory=dict)

    def q(self, state: PbsState) -> np.ndarray:
        return self.net.q_values(encode_state(state, self.normalize))[0]

    def greedy(self, state: PbsState) -> EscortAction:
        """Highest-valued legal action."""
        q = self.q(state)
        q[~np.asarray(legal_mask(state))] = -np.inf
        return EscortAction.from_index(int(np.argmax(q)))

    def save(self, path) -> None:
        payload = {
            "format": CHECKPOINT_FORMAT,
            "grid": {"m": self.m, "n": self.n, "d": self.d, "e": self.e},
            "normalize": self.normalize,
            "meta": self.meta,
            "net": self.net.to_json(),
        }
        Path(path).write_text(json.dumps(payload) + "\n")

    @classmethod
    def load(cls, path) -> "Agent":
        obj = json.loads(Path(path).read_text())
        if obj.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"unsupported checkpoint format {obj.get('format')!r}")
        g = obj["grid"]
        return cls(DuelingNet.from_json(obj["net"]), g["m"], g["n"], g["d"], g["e"],
                   obj.get("normalize", False), obj.get("meta", {}))


def train(sampler: Callable[[np.random.Generator], PbsState], config: TrainConfig,
          progress: Optional[Callable[[EpisodeMetrics, DuelingNet], None]] = None) -> tuple[Agent, list[EpisodeMetrics]]:
    """Train a dueling network with double-DQN targets.

    Each step explores with probability epsilon (the guided/random mixer at
    rate eta) and otherwise acts greedily on the unmasked Q values. Illegal
    greedy actions leave the state unchanged and earn nothing. Targets take
    their argmax over the actions legal in the next state. After every
    step one Adam update is taken on a uniform mini-batch; the target
    network is refreshed every ``target_sync`` episodes.
    """
    rng = np.random.default_rng(config.seed)
    probe = sampler(rng)
    m, n, d, e = probe.m, probe.n, probe.d, probe.e
    width, n_actions = 2 * (d + e), 4 * e
    hidden = config.hidden or default_hidden(m, n)
    net = DuelingNet.init(width, n_actions, hidden, config.head_hidden, rng=rng)
    target = net.copy()
    opt = Adam(net.params, lr=config.lr)
    buf = ReplayBuffer(config.capacity, width, n_actions)
    cap = config.step_cap or 4 * elimination_bound(max(m, n), d)
    metrics: list[EpisodeMetrics] = []

    for ep in range(config.episodes):
        eps, eta, gamma = config.at(ep)
        state = sampler(rng)
        s = encode_state(state, config.normalize)
        losses = []
        steps = 0
        done = state.is_terminal()
        while not done and steps < cap:
            if rng.random() < eps:
                action = semi_random_action(state, eta, rng)
            else:
                action = EscortAction.from_index(int(np.argmax(net.q_values(s)[0])))
            if is_legal(state, action):
                state, reward, done, _ = apply_action(state, action)
            else:
                reward, done = 0, False
            s_next = encode_state(state, config.normalize)
            buf.add(s, action.index, reward, s_next, done, legal_mask(state))
            s = s_next
            steps += 1

            bs, ba, br, bs2, bd, bm = buf.sample(config.batch, rng)
            y = double_dqn_targets(net, target, br, bs2, bd, gamma, bm)
            loss, grads = net.loss_and_grads(bs, ba, y)
            if not np.isfinite(loss):
                raise DivergenceDetected(f"non-finite loss in episode {ep}")
            opt.step(grads)
            losses.append(loss)
        if (ep + 1) % config.target_sync == 0:
            target = net.copy()
        rec = EpisodeMetrics(ep, steps, float(np.mean(losses)) if losses else 0.0, eps, eta, gamma,
                             bool(done))
        metrics.append(rec)
        if progress is not None:
            progress(rec, net)

    meta = {"config": _config_json(config), "episodes_done": config.episodes,
            "final_schedules": dict(zip(("epsilon", "eta", "gamma"), config.at(config.episodes - 1)))}
    return Agent(net, m, n, d, e, config.normalize, meta), metrics


def _config_json(config: TrainConfig) -> dict:
    out = asdict(config)
    for k, v in out.items():
        if isinstance(v, tuple):
            out[k] = list(v)
    return out


def write_metrics(metrics: Sequence[EpisodeMetrics], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["episode", "steps", "loss", "epsilon", "eta", "gamma", "solved"])
        for r in metrics:
            w.writerow([r.episode, r.steps, f"{r.loss:.6g}", f"{r.epsilon:.6f}", f"{r.eta:.6f}",
                        f"{r.gamma:.6f}", int(r.solved)])


def policy_rollout(agent: Agent, instance: Instance | PbsState, cap: Optional[int] = None,
                   instance_id: Optional[str] = None) -> Plan:
    """Greedy masked rollout; raises Failed after ``cap`` moves or on a revisited state."""
    state = instance.state() if isinstance(instance, Instance) else instance
    plan_id = instance_id or (instance.id if isinstance(instance, Instance) else "state")
    if cap is None:
        cap = elimination_bound(max(state.m, state.n), state.d)
    moves = []
    seen = {state.key()}
    while not state.is_terminal():
        if len(moves) >= cap:
            raise Failed(cap)
        state, _, _, rec = apply_action(state, agent.greedy(state))
        moves.append(rec)
        if state.key() in seen:
            # deterministic policy in a deterministic grid: this would cycle until the cap
            raise Failed(cap, "greedy policy entered a cycle")
        seen.add(state.key())
    return Plan(plan_id, moves)


@dataclass
class EvalSummary:
    total: int
    success: int
    mean_objective: float
    mean_gap: float
    optimal: int

    @property
    def success_rate(self) -> float:
        return self.success / self.total if self.total else 0.0


def evaluate(agent: Agent, instances: Sequence[Instance], optimal: Sequence[int]) -> EvalSummary:
    """Success under the elimination rule and mean relative gap ``(obj - opt) / obj``."""
    objs, gaps, n_opt = [], [], 0
    for inst, opt in zip(instances, optimal):
        try:
            obj = policy_rollout(agent, inst).objective
        except Failed:
            continue
        objs.append(obj)
        gaps.append((obj - opt) / obj if obj else 0.0)
        n_opt += obj == opt
    return EvalSummary(len(instances), len(objs), float(np.mean(objs)) if objs else float("nan"),
                       float(np.mean(gaps)) if gaps else float("nan"), n_opt)
