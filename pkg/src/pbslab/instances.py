"""Benchmark instances: series definitions, seeded generation and JSON files."""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass
from math import perm
from pathlib import Path
from typing import Optional, Sequence

from .grid import PbsState, Position


class InfeasibleSpec(ValueError):
    pass


@dataclass(frozen=True)
class Instance:
    id: str
    m: int
    n: int
    items: tuple[Position, ...]
    escorts: tuple[Position, ...]
    io: tuple[Position, ...]
    seed: int = 0

    def __post_init__(self):
        for name in ("items", "escorts", "io"):
            object.__setattr__(self, name, tuple(Position(int(r), int(c)) for r, c in getattr(self, name)))
        self.state()  # validates

    @property
    def d(self) -> int:
        return len(self.items)

    @property
    def e(self) -> int:
        return len(self.escorts)

    def state(self) -> PbsState:
        return PbsState(self.m, self.n, self.items, self.escorts, self.io)

    @classmethod
    def from_state(cls, state: PbsState, id: str = "state", seed: int = 0) -> "Instance":
        return cls(id, state.m, state.n, state.items, state.escorts, state.io, seed)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "m": self.m,
            "n": self.n,
            "items": [list(p) for p in self.items],
            "escorts": [list(p) for p in self.escorts],
            "io": [list(p) for p in self.io],
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Instance":
        return cls(obj["id"], int(obj["m"]), int(obj["n"]), obj["items"], obj["escorts"], obj["io"],
                   int(obj.get("seed", 0)))


@dataclass(frozen=True)
class SeriesSpec:
    """One benchmark series.

    ``escort_layout`` is ``None`` for randomly placed escorts, otherwise the
    fixed escort cells. ``count=None`` asks for exhaustive enumeration, which
    is only supported for single-item series with fixed escorts.
    """

    name: str
    family: str
    m: int
    n: int
    d: int
    e: int
    io: tuple[Position, ...]
    count: Optional[int] = 1000
    escort_layout: Optional[tuple[Position, ...]] = None

    def __post_init__(self):
        if self.family not in ("R", "F", "Rect"):
            raise ValueError(f"unknown family {self.family!r}")
        if self.count is not None and self.count < 1:
            raise ValueError("count must be at least 1")
        if len(self.io) != self.d:
            raise ValueError("io layout must list one cell per desired item")
        if self.escort_layout is not None and len(self.escort_layout) != self.e:
            raise ValueError("fixed escort layout must list every escort")


def top_row_io(n: int, d: int) -> tuple[Position, ...]:
    """``d`` I/O points spread evenly along the top row (segment centres)."""
    return tuple(Position(0, (2 * i + 1) * n // (2 * d)) for i in range(d))


def default_io(n: int, d: int) -> tuple[Position, ...]:
    if d == 1:
        return (Position(0, 0),)
    if d == 2:
        return (Position(0, 0), Position(0, n - 1))
    return tuple(Position(0, round(i * (n - 1) / (d - 1))) for i in range(d))


_SMALL = re.compile(r"^([RF])(\d)(\d)(\d)$")
_RECT = re.compile(r"^R-(\d+)[x×](\d+)-(\d+)-(\d+)$")


def series(name: str, count: Optional[int] = None) -> SeriesSpec:
    """Parse a series id such as ``R422``, ``F611`` or ``R-6x37-1-22``."""
    mt = _SMALL.match(name)
    if mt:
        fam, n, d, e = mt.group(1), *map(int, mt.groups()[1:])
        if fam == "F":
            if e != 1:
                raise ValueError("F series use exactly one escort")
            io = (Position(0, 0),) if d == 1 else (Position(0, 0), Position(0, 1))
            if d > 2:
                raise ValueError("F series support one or two desired items")
            default_count = None if d == 1 else 200
            return SeriesSpec(name, "F", n, n, d, e, io,
                              count if count is not None else default_count,
                              escort_layout=(Position(0, 0),))
        return SeriesSpec(name, "R", n, n, d, e, default_io(n, d), count if count is not None else 1000)
    mt = _RECT.match(name)
    if mt:
        m, n, d, e = map(int, mt.groups())
        default_count = 200 if d == 1 else 100
        return SeriesSpec(f"R-{m}x{n}-{d}-{e}", "Rect", m, n, d, e, top_row_io(n, d),
                          count if count is not None else default_count)
    raise ValueError(f"unrecognised series id {name!r}")


def _check_feasible(m: int, n: int, d: int, e: int) -> None:
    if d < 1 or e < 1:
        raise InfeasibleSpec("need d >= 1 and e >= 1")
    if d + e > m * n:
        raise InfeasibleSpec(f"d + e = {d + e} exceeds {m}x{n} = {m * n} cells")


def _sample_one(spec: SeriesSpec, rng: random.Random) -> tuple[list, list]:
    cells = [Position(r, c) for r in range(spec.m) for c in range(spec.n)]
    while True:
        if spec.escort_layout is None:
            picked = rng.sample(cells, spec.d + spec.e)
            items, escorts = picked[:spec.d], picked[spec.d:]
        else:
            free = [p for p in cells if p not in spec.escort_layout]
            items, escorts = rng.sample(free, spec.d), list(spec.escort_layout)
        if any(p != q for p, q in zip(items, spec.io)):
            return items, escorts


def generate(spec: SeriesSpec, seed: int = 0) -> list[Instance]:
    """Deterministic instance list for ``(spec, seed)``.

    Every instance stores its own seed so it can be regenerated alone with
    ``regenerate``.
    """
    _check_feasible(spec.m, spec.n, spec.d, spec.e)
    if spec.count is None:
        return enumerate_fixed(spec)
    master = random.Random(seed)
    out = []
    for i in range(spec.count):
        inst_seed = master.getrandbits(63)
        out.append(regenerate(spec, inst_seed, i))
    return out


def regenerate(spec: SeriesSpec, inst_seed: int, index: int = 0) -> Instance:
    items, escorts = _sample_one(spec, random.Random(inst_seed))
    return Instance(f"{spec.name}-{index:04d}", spec.m, spec.n, items, escorts, spec.io, inst_seed)


def enumerate_fixed(spec: SeriesSpec) -> list[Instance]:
    """Every placement of a single item with fixed escorts, row-major."""
    if spec.d != 1 or spec.escort_layout is None:
        raise ValueError("exhaustive enumeration needs d = 1 and fixed escorts")
    out = []
    for r in range(spec.m):
        for c in range(spec.n):
            p = Position(r, c)
            if p in spec.escort_layout or p == spec.io[0]:
                continue
            out.append(Instance(f"{spec.name}-{len(out):04d}", spec.m, spec.n, [p],
                                spec.escort_layout, spec.io, 0))
    return out


def state_space_size(m: int, n: int, d: int, e: int) -> int:
    """Number of non-terminal item/escort placements with labelled escorts."""
    _check_feasible(m, n, d, e)
    return perm(m * n, d + e) - perm(m * n - d, e)


def elimination_bound(n: int, d: int) -> int:
    """Plans longer than this count as failed solves."""
    return (8 * n - 11) * d


def save_instances(instances: Sequence[Instance], path) -> None:
    path = Path(path)
    if len(instances) == 1:
        payload = instances[0].to_json()
    else:
        payload = [inst.to_json() for inst in instances]
    path.write_text(json.dumps(payload, indent=1) + "\n")


def load_instances(path) -> list[Instance]:
    """Load a single-instance file, a series array, or every ``*.json`` in a directory."""
    path = Path(path)
    if path.is_dir():
        out = []
        for f in sorted(path.glob("*.json")):
            if f.name.endswith(".manifest.json"):
                continue
            out.extend(load_instances(f))
        return out
    obj = json.loads(path.read_text())
    if isinstance(obj, list):
        return [Instance.from_json(o) for o in obj]
    return [Instance.from_json(obj)]
