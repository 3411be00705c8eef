from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass
class Transition:
    s: np.ndarray
    a: int
    r: float
    s_next: np.ndarray
    done_next: bool
    mask_next: Optional[np.ndarray] = None


class ReplayBuffer:
    """Fixed-capacity ring of transitions with uniform batch sampling."""

    def __init__(self, capacity: int, width: int, n_actions: int = 0):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        # legal actions in s_next; all True when the caller does not supply them
        self.mask_next = np.ones((capacity, n_actions), dtype=bool)
        self.s = np.zeros((capacity, width), dtype=np.float32)
        self.s_next = np.zeros((capacity, width), dtype=np.float32)
        self.a = np.zeros(capacity, dtype=np.int64)
        self.r = np.zeros(capacity, dtype=np.float64)
        self.done = np.zeros(capacity, dtype=bool)
        self.size = 0
        self._head = 0

    def __len__(self) -> int:
        return self.size

    def add(self, s, a: int, r: float, s_next, done_next: bool, mask_next=None) -> None:
        i = self._head
        if mask_next is not None:
            self.mask_next[i] = mask_next
        self.s[i] = s
        self.a[i] = a
        self.r[i] = r
        self.s_next[i] = s_next
        self.done[i] = done_next
        self._head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch: int, rng: np.random.Generator):
        """Indices drawn without replacement; the whole buffer if it is smaller than ``batch``."""
        k = min(batch, self.size)
        idx = rng.choice(self.size, size=k, replace=False)
        return (self.s[idx].astype(np.float64), self.a[idx], self.r[idx],
                self.s_next[idx].astype(np.float64), self.done[idx], self.mask_next[idx])
