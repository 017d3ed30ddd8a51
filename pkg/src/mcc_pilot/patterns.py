"""Pilot patterns on the k x k subband/slot grid and the baseline constructions.

Slots and subbands are 0-indexed. A pattern stores one active subband per
slot (``schedule[t]``); the binary matrix view has ``X[f, t] == 1`` exactly
when ``schedule[t] == f``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .rng import make_rng


@dataclass(frozen=True)
class GridDims:
    k: int
    M: int

    def __post_init__(self):
        if self.k < 1 or self.M < 1:
            raise ValueError(f"k and M must be positive, got k={self.k}, M={self.M}")

    @property
    def N(self) -> int:
        return self.k * self.M

    def subband(self, f: int) -> range:
        """Subcarrier indices of subband ``f``."""
        return range(f * self.M, (f + 1) * self.M)


@dataclass(frozen=True)
class PilotPattern:
    k: int
    schedule: tuple[int, ...]
    is_permutation: bool = field(init=False)

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be positive, got {self.k}")
        sched = tuple(int(s) for s in self.schedule)
        object.__setattr__(self, "schedule", sched)
        object.__setattr__(self, "is_permutation", _is_perm(self.k, sched))

    def __len__(self):
        return len(self.schedule)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.schedule, dtype=np.int64)

    def pilots(self) -> list[tuple[int, int]]:
        """Pilot locations as ``(f, t)`` pairs, ordered by slot."""
        return [(f, t) for t, f in enumerate(self.schedule)]

    def to_matrix(self) -> np.ndarray:
        X = np.zeros((self.k, self.k), dtype=np.int8)
        X[self.as_array(), np.arange(self.k)] = 1
        return X

    @classmethod
    def from_matrix(cls, X) -> "PilotPattern":
        X = np.asarray(X)
        if X.ndim != 2 or X.shape[0] != X.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {X.shape}")
        if not np.all(X.sum(axis=0) == 1):
            raise ValueError("every column (slot) must hold exactly one pilot")
        return cls(X.shape[0], tuple(int(f) for f in np.argmax(X, axis=0)))

    def to_json(self) -> dict:
        return {"k": self.k, "schedule": list(self.schedule)}


def _is_perm(k, sched):
    return len(sched) == k and sorted(sched) == list(range(k))


def validate(pattern: PilotPattern, require_permutation: bool = True) -> bool:
    """Check one subband per slot and, optionally, one slot per subband."""
    k = pattern.k
    if len(pattern.schedule) != k:
        return False
    if any(s < 0 or s >= k for s in pattern.schedule):
        return False
    if require_permutation:
        return _is_perm(k, pattern.schedule)
    return True


def baseline_3gpp(k: int, f0: int = 0) -> PilotPattern:
    """Block-hopping pattern of the SRS frequency-hopping configuration.

    Odd ``k`` hops by ``k // 2`` each slot; even ``k`` interleaves the two
    halves of the band.
    """
    if k < 2:
        raise ValueError(f"3GPP hopping needs k >= 2, got {k}")
    f0 %= k
    t = np.arange(k)
    if k % 2:
        sched = (f0 + t * (k // 2)) % k
    else:
        sched = (f0 + t // 2 + (k // 2) * (t % 2)) % k
    return PilotPattern(k, tuple(sched.tolist()))


def baseline_chirp(k: int) -> PilotPattern:
    """Quadratic trajectory ``t**2 mod k``; not a permutation for odd prime k."""
    if k < 2:
        raise ValueError(f"chirp pattern needs k >= 2, got {k}")
    t = np.arange(k)
    return PilotPattern(k, tuple(((t * t) % k).tolist()))


def baseline_random(k: int, seed) -> PilotPattern:
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    rng = make_rng(seed)
    return PilotPattern(k, tuple(rng.permutation(k).tolist()))


def cyclic_shift(pattern: PilotPattern, s: int) -> PilotPattern:
    """Rotate the slot axis: ``schedule'[t] = schedule[(t + s) % k]``."""
    k = pattern.k
    s %= k
    sched = pattern.schedule[s:] + pattern.schedule[:s]
    return PilotPattern(k, sched)


# --- pattern files -----------------------------------------------------------

def dumps_pattern(pattern: PilotPattern, fmt: str = "text") -> str:
    if fmt == "json":
        return json.dumps(pattern.to_json()) + "\n"
    return f"{pattern.k}\n{' '.join(str(s) for s in pattern.schedule)}\n"


def loads_pattern(text: str) -> PilotPattern:
    """Parse either the two-line text format or the JSON object format."""
    stripped = text.strip()
    if stripped.startswith("{"):
        obj = json.loads(stripped)
        return PilotPattern(int(obj["k"]), tuple(int(s) for s in obj["schedule"]))
    lines = [ln for ln in stripped.splitlines() if ln.strip()]
    if len(lines) != 2:
        raise ValueError("pattern text must have exactly two lines: k, then the schedule")
    k = int(lines[0])
    sched = tuple(int(s) for s in lines[1].split())
    if len(sched) != k:
        raise ValueError(f"schedule has {len(sched)} entries, expected {k}")
    return PilotPattern(k, sched)


def read_pattern(path) -> PilotPattern:
    return loads_pattern(Path(path).read_text())


def write_pattern(pattern: PilotPattern, path) -> None:
    path = Path(path)
    fmt = "json" if path.suffix.lower() == ".json" else "text"
    path.write_text(dumps_pattern(pattern, fmt))
