"""Finitely supported coefficient sequences on the dyadic index set.

A :class:`HybridSequence` keeps its support in three parallel numpy arrays
(levels, shifts, values) sorted lexicographically by ``(j, k)``.  Zeros are
dropped on construction, so two sequences are equal iff their arrays are.
Instances are immutable and can be shared freely.
"""
from __future__ import annotations

import json
from typing import Iterable, Mapping

import numpy as np

from .errors import ParameterError
from .index_domain import MAX_LEVEL, DomainConfig, Index


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


class HybridSequence:
    """Sparse map ``(j, k) -> value`` with ``0 <= k_i < 2**j_i``."""

    __slots__ = ("domain", "levels", "shifts", "values")

    def __init__(self, domain, levels, shifts, values, *, validate: bool = True, presorted: bool = False):
        if isinstance(domain, int):
            domain = DomainConfig(domain)
        d = domain.dimension
        levels = np.asarray(levels, dtype=np.int64).reshape(-1, d)
        shifts = np.asarray(shifts, dtype=np.int64).reshape(-1, d)
        values = np.asarray(values, dtype=np.float64).reshape(-1)
        if not len(levels) == len(shifts) == len(values):
            raise ParameterError("levels, shifts and values must have equal length")
        if validate and len(values):
            if levels.min() < 0 or levels.max() > MAX_LEVEL:
                raise ParameterError(f"level components must lie in [0, {MAX_LEVEL}]")
            if shifts.min() < 0 or np.any(shifts >= np.left_shift(np.int64(1), levels)):
                raise ParameterError("shift outside the translation range of its level")
            if not np.all(np.isfinite(values)):
                raise ParameterError("coefficients must be finite")
        nz = values != 0
        if not nz.all():
            levels, shifts, values = levels[nz], shifts[nz], values[nz]
        if not presorted and len(values) > 1:
            keys = np.concatenate([levels, shifts], axis=1)
            order = np.lexsort(keys.T[::-1])
            levels, shifts, values = levels[order], shifts[order], values[order]
            keys = keys[order]
            if np.any(np.all(keys[1:] == keys[:-1], axis=1)):
                raise ParameterError("duplicate index in sequence")
        self.domain = domain
        self.levels = _readonly(levels)
        self.shifts = _readonly(shifts)
        self.values = _readonly(values)

    # construction -----------------------------------------------------------

    @classmethod
    def empty(cls, domain) -> "HybridSequence":
        d = domain if isinstance(domain, int) else domain.dimension
        return cls(domain, np.zeros((0, d)), np.zeros((0, d)), np.zeros(0))

    @classmethod
    def from_dict(cls, domain, entries: Mapping) -> "HybridSequence":
        """Build from ``{(j, k): value}`` (keys may be :class:`Index` tuples)."""
        d = domain if isinstance(domain, int) else domain.dimension
        items = list(entries.items())
        levels = [tuple(key[0]) for key, _ in items]
        shifts = [tuple(key[1]) for key, _ in items]
        values = [v for _, v in items]
        if not items:
            return cls.empty(domain)
        return cls(domain, np.array(levels).reshape(-1, d), np.array(shifts).reshape(-1, d), values)

    @classmethod
    def single(cls, domain, j, k, value: float) -> "HybridSequence":
        return cls.from_dict(domain, {(tuple(j), tuple(k)): value})

    def _new(self, levels, shifts, values) -> "HybridSequence":
        return HybridSequence(self.domain, levels, shifts, values, validate=False, presorted=True)

    # container protocol -----------------------------------------------------

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    def __len__(self) -> int:
        return len(self.values)

    def keys(self) -> list:
        return [Index(tuple(map(int, j)), tuple(map(int, k))) for j, k in zip(self.levels, self.shifts)]

    def items(self) -> list:
        return list(zip(self.keys(), (float(v) for v in self.values)))

    def to_dict(self) -> dict:
        return dict(self.items())

    def support(self) -> frozenset:
        return frozenset(self.keys())

    def __getitem__(self, key) -> float:
        j, k = np.asarray(key[0]), np.asarray(key[1])
        hit = np.all(self.levels == j, axis=1) & np.all(self.shifts == k, axis=1)
        idx = np.flatnonzero(hit)
        return float(self.values[idx[0]]) if len(idx) else 0.0

    def __eq__(self, other) -> bool:
        if not isinstance(other, HybridSequence):
            return NotImplemented
        return (
            self.dimension == other.dimension
            and np.array_equal(self.levels, other.levels)
            and np.array_equal(self.shifts, other.shifts)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    def __repr__(self) -> str:
        return f"HybridSequence(d={self.dimension}, nnz={len(self)})"

    # algebra ----------------------------------------------------------------

    def scale(self, t: float) -> "HybridSequence":
        return HybridSequence(self.domain, self.levels, self.shifts, self.values * t, validate=False, presorted=True)

    def __mul__(self, t):
        return self.scale(t)

    __rmul__ = __mul__

    def __neg__(self):
        return self.scale(-1.0)

    def __add__(self, other: "HybridSequence") -> "HybridSequence":
        if self.dimension != other.dimension:
            raise ParameterError("dimension mismatch")
        levels = np.concatenate([self.levels, other.levels])
        shifts = np.concatenate([self.shifts, other.shifts])
        values = np.concatenate([self.values, other.values])
        if len(values) == 0:
            return self
        keys = np.concatenate([levels, shifts], axis=1)
        uniq, inv = np.unique(keys, axis=0, return_inverse=True)
        summed = np.bincount(inv.reshape(-1), weights=values, minlength=len(uniq))
        d = self.dimension
        return self._new(uniq[:, :d], uniq[:, d:], summed)

    def __sub__(self, other: "HybridSequence") -> "HybridSequence":
        return self + (-other)

    def mask(self, keep: np.ndarray) -> "HybridSequence":
        """Restriction to the entries where the boolean array ``keep`` is true."""
        keep = np.asarray(keep, dtype=bool)
        return self._new(self.levels[keep], self.shifts[keep], self.values[keep])

    def membership(self, indices: Iterable) -> np.ndarray:
        """Boolean array marking stored entries whose index is in ``indices``."""
        wanted = {(tuple(map(int, key[0])), tuple(map(int, key[1]))) for key in indices}
        if not wanted:
            return np.zeros(len(self), dtype=bool)
        return np.fromiter((key in wanted for key in self.keys()), dtype=bool, count=len(self))

    def restrict(self, indices: Iterable) -> "HybridSequence":
        return self.mask(self.membership(indices))

    def without(self, indices: Iterable) -> "HybridSequence":
        return self.mask(~self.membership(indices))

    def with_values(self, values) -> "HybridSequence":
        return HybridSequence(self.domain, self.levels, self.shifts, values, validate=False, presorted=True)

    # serialization ----------------------------------------------------------

    def to_text(self) -> str:
        """One line per entry: ``j_1 .. j_d  k_1 .. k_d  value`` (``repr`` round-trips doubles)."""
        lines = [f"# d={self.dimension}"]
        for j, k, v in zip(self.levels, self.shifts, self.values):
            lines.append(" ".join(map(str, j)) + "  " + " ".join(map(str, k)) + "  " + repr(float(v)))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, dimension: int | None = None) -> "HybridSequence":
        rows = []
        d = dimension
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                head = line[1:].strip()
                if head.startswith("d=") and d is None:
                    d = int(head[2:])
                continue
            fields = line.split()
            if d is None:
                if len(fields) % 2 != 1:
                    raise ParameterError(f"line {lineno}: cannot infer dimension from {len(fields)} fields")
                d = (len(fields) - 1) // 2
            if len(fields) != 2 * d + 1:
                raise ParameterError(f"line {lineno}: expected {2 * d + 1} fields, got {len(fields)}")
            try:
                rows.append(([int(x) for x in fields[:d]], [int(x) for x in fields[d:2 * d]], float(fields[-1])))
            except ValueError as exc:
                raise ParameterError(f"line {lineno}: {exc}") from None
        if d is None:
            raise ParameterError("empty sequence file without '# d=' header")
        if not rows:
            return cls.empty(d)
        levels, shifts, values = zip(*rows)
        return cls(d, levels, shifts, values)

    def to_json_obj(self) -> dict:
        return {
            "d": self.dimension,
            "entries": [
                {"j": [int(x) for x in j], "k": [int(x) for x in k], "v": float(v)}
                for j, k, v in zip(self.levels, self.shifts, self.values)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj())

    @classmethod
    def from_json_obj(cls, obj: Mapping) -> "HybridSequence":
        try:
            d = int(obj["d"])
            entries = obj["entries"]
            if not entries:
                return cls.empty(d)
            levels = [e["j"] for e in entries]
            shifts = [e["k"] for e in entries]
            values = [float(e["v"]) for e in entries]
        except (KeyError, TypeError) as exc:
            raise ParameterError(f"malformed sequence JSON: {exc}") from None
        return cls(d, levels, shifts, values)

    @classmethod
    def from_json(cls, text: str) -> "HybridSequence":
        return cls.from_json_obj(json.loads(text))


def load_sequence(path) -> HybridSequence:
    """Read a sequence from ``path``; JSON if the content starts with ``{``, text otherwise."""
    with open(path) as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        return HybridSequence.from_json(text)
    return HybridSequence.from_text(text)
