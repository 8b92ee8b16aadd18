"""Dictionary-backed histograms and episodic pattern memory.

Symbols map to entries by exact match; fixed-length numeric snippets map
to the nearest entry by diagonal Mahalanobis distance, within a gate
radius.  New entries are created promiscuously while capacity lasts
(bootstrap); when space runs out, items beyond the gate land in the
outlier bin.  Compaction merges the closest entries and drops the rarely
hit ones, transferring their counts to the outlier bin, so total counts
are conserved through every curation step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DictionaryMismatch, LengthMismatch, UnknownId
from .stats import OUTLIER_BIN


@dataclass
class DictEntry:
    eid: int
    kind: str  # "symbol" | "pattern"
    count: int = 0
    last_hit: int = 0
    provisional: bool = True
    symbol: str | None = None
    mean: np.ndarray | None = None
    _m2: np.ndarray | None = None  # Welford accumulator, per element

    def std(self) -> np.ndarray | None:
        """Per-element population std of the items absorbed so far."""
        if self.mean is None:
            return None
        if self.count < 2 or self._m2 is None:
            return np.zeros_like(self.mean)
        return np.sqrt(self._m2 / self.count)

    def absorb(self, x: np.ndarray) -> None:
        self.count += 1
        delta = x - self.mean
        self.mean = self.mean + delta / self.count
        self._m2 = self._m2 + delta * (x - self.mean)


class Dictionary:
    """Shared bin definitions for histograms; single writer per instance."""

    def __init__(
        self,
        name: str = "dict",
        capacity: int = 64,
        pattern_length: int | None = None,
        gate_radius: float = 3.0,
        promote_threshold: int = 3,
        drop_threshold: int = 2,
        std_floor: float = 1e-6,
    ):
        self.name = name
        self.capacity = capacity
        self.pattern_length = pattern_length
        self.gate_radius = gate_radius
        self.promote_threshold = promote_threshold
        self.drop_threshold = drop_threshold
        self.std_floor = std_floor
        self.entries: dict[int, DictEntry] = {}
        self.outlier_count = 0
        self.clock = 0
        self._next_id = 0
        self._symbols: dict[str, int] = {}
        # running stats of the whole pattern stream, for singleton bands
        self._g_count = 0
        self._g_mean: np.ndarray | None = None
        self._g_m2: np.ndarray | None = None

    # -- global stream scale -------------------------------------------------

    def _global_std(self, length: int) -> np.ndarray:
        if self._g_count < 2 or self._g_m2 is None:
            return np.full(length, self.std_floor)
        return np.maximum(np.sqrt(self._g_m2 / self._g_count), self.std_floor)

    def _track_global(self, x: np.ndarray) -> None:
        if self._g_mean is None:
            self._g_mean = np.zeros_like(x)
            self._g_m2 = np.zeros_like(x)
        self._g_count += 1
        delta = x - self._g_mean
        self._g_mean = self._g_mean + delta / self._g_count
        self._g_m2 = self._g_m2 + delta * (x - self._g_mean)

    def _band(self, entry: DictEntry) -> np.ndarray:
        """Effective std band; singletons get the gate-scaled stream estimate."""
        if entry.count >= 2:
            return np.maximum(entry.std(), self.std_floor)
        return np.maximum(self._global_std(entry.mean.shape[0]) / self.gate_radius, self.std_floor)

    # -- assignment -----------------------------------------------------------

    def assign(self, item) -> int:
        """Map an item to an entry id, creating or overflowing as configured.

        Returns OUTLIER_BIN when the dictionary is full and nothing matches
        within the gate radius.
        """
        self.clock += 1
        if isinstance(item, str):
            return self._assign_symbol(item)
        return self._assign_pattern(np.atleast_1d(np.asarray(item, dtype=np.float64)))

    def _assign_symbol(self, sym: str) -> int:
        eid = self._symbols.get(sym)
        if eid is not None:
            e = self.entries[eid]
            e.count += 1
            e.last_hit = self.clock
            e.provisional = e.count < self.promote_threshold
            return eid
        if len(self.entries) < self.capacity:
            eid = self._next_id
            self._next_id += 1
            self.entries[eid] = DictEntry(
                eid=eid, kind="symbol", count=1, last_hit=self.clock, symbol=sym,
                provisional=1 < self.promote_threshold,
            )
            self._symbols[sym] = eid
            return eid
        self.outlier_count += 1
        return OUTLIER_BIN

    def _assign_pattern(self, x: np.ndarray) -> int:
        if self.pattern_length is None:
            self.pattern_length = x.shape[0]
        if x.shape[0] != self.pattern_length:
            raise LengthMismatch(f"pattern length {x.shape[0]} != {self.pattern_length}")
        self._track_global(x)
        best_id, best_dist = None, math.inf
        for eid in sorted(self.entries):
            e = self.entries[eid]
            if e.kind != "pattern":
                continue
            z = (x - e.mean) / self._band(e)
            dist = math.sqrt(float(np.mean(z * z)))
            if dist < best_dist:  # strict: ties keep the lowest id
                best_id, best_dist = eid, dist
        if best_id is not None and best_dist <= self.gate_radius:
            e = self.entries[best_id]
            e.absorb(x)
            e.last_hit = self.clock
            e.provisional = e.count < self.promote_threshold
            return best_id
        if len(self.entries) < self.capacity:
            eid = self._next_id
            self._next_id += 1
            self.entries[eid] = DictEntry(
                eid=eid, kind="pattern", count=1, last_hit=self.clock,
                mean=x.copy(), _m2=np.zeros_like(x),
                provisional=1 < self.promote_threshold,
            )
            return eid
        self.outlier_count += 1
        return OUTLIER_BIN

    # -- curation ---------------------------------------------------------------

    def _merge_entries(self, keep: DictEntry, gone: DictEntry) -> None:
        total = keep.count + gone.count
        if keep.kind == "pattern" and gone.kind == "pattern":
            delta = gone.mean - keep.mean
            mean = (keep.count * keep.mean + gone.count * gone.mean) / total
            # pooled variance law, per element (Chan et al. update)
            m2 = keep._m2 + gone._m2 + delta * delta * keep.count * gone.count / total
            keep.mean, keep._m2 = mean, m2
        keep.count = total
        keep.last_hit = max(keep.last_hit, gone.last_hit)
        keep.provisional = keep.count < self.promote_threshold

    def compact(self, target_size: int) -> dict[int, int]:
        """Shrink to ``target_size`` entries; returns the id remap applied.

        Rarely hit entries are dropped first (counts to the outlier bin),
        then the closest pattern pairs are merged until the target holds.
        Symbols merge only via :meth:`simplify`; if only symbols remain, the
        least common are dropped.
        """
        if target_size < 1:
            raise ValueError("target size must be >= 1")
        remap: dict[int, int] = {}

        for eid in sorted(self.entries):
            e = self.entries[eid]
            if e.count < self.drop_threshold:
                self.outlier_count += e.count
                remap[eid] = OUTLIER_BIN
                if e.symbol is not None:
                    self._symbols.pop(e.symbol, None)
                del self.entries[eid]

        while len(self.entries) > target_size:
            pat = [e for e in self.entries.values() if e.kind == "pattern"]
            if len(pat) >= 2:
                best = None
                for i in range(len(pat)):
                    for j in range(i + 1, len(pat)):
                        dist = float(np.linalg.norm(pat[i].mean - pat[j].mean))
                        key = (dist, pat[i].eid, pat[j].eid)
                        if best is None or key < best:
                            best = key
                _, ka, kb = best
                keep, gone = self.entries[min(ka, kb)], self.entries[max(ka, kb)]
                self._merge_entries(keep, gone)
                remap[gone.eid] = keep.eid
                del self.entries[gone.eid]
            else:
                syms = sorted(
                    (e for e in self.entries.values() if e.kind == "symbol"),
                    key=lambda e: (e.count, e.eid),
                )
                if not syms:
                    break
                gone = syms[0]
                self.outlier_count += gone.count
                remap[gone.eid] = OUTLIER_BIN
                self._symbols.pop(gone.symbol, None)
                del self.entries[gone.eid]

        for old, new in list(remap.items()):  # chase merge chains
            while new in remap and new != OUTLIER_BIN:
                new = remap[new]
            remap[old] = new
        return remap

    def simplify(self, mapping: dict[int, int]) -> dict[int, int]:
        """Merge categories per the mapping (old id -> surviving id)."""
        for old, new in mapping.items():
            if old not in self.entries:
                raise UnknownId(f"entry {old} does not exist")
            if new != OUTLIER_BIN and new not in self.entries:
                raise UnknownId(f"target entry {new} does not exist")
        out: dict[int, int] = {}
        for old, new in sorted(mapping.items()):
            if old == new:
                continue
            gone = self.entries[old]
            if new == OUTLIER_BIN:
                self.outlier_count += gone.count
            else:
                self._merge_entries(self.entries[new], gone)
            if gone.symbol is not None:
                self._symbols.pop(gone.symbol, None)
            del self.entries[old]
            out[old] = new
        return out

    def total_count(self) -> int:
        return sum(e.count for e in self.entries.values()) + self.outlier_count

    # -- serialization ------------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "capacity": self.capacity,
            "pattern_length": self.pattern_length,
            "gate_radius": self.gate_radius,
            "promote_threshold": self.promote_threshold,
            "drop_threshold": self.drop_threshold,
            "std_floor": self.std_floor,
            "outlier_count": self.outlier_count,
            "clock": self.clock,
            "next_id": self._next_id,
            "global": {
                "count": self._g_count,
                "mean": None if self._g_mean is None else self._g_mean.tolist(),
                "m2": None if self._g_m2 is None else self._g_m2.tolist(),
            },
            "entries": [
                {
                    "eid": e.eid,
                    "kind": e.kind,
                    "count": e.count,
                    "last_hit": e.last_hit,
                    "provisional": e.provisional,
                    "symbol": e.symbol,
                    "mean": None if e.mean is None else e.mean.tolist(),
                    "m2": None if e._m2 is None else e._m2.tolist(),
                }
                for _, e in sorted(self.entries.items())
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Dictionary":
        dct = cls(
            name=d["name"],
            capacity=d["capacity"],
            pattern_length=d["pattern_length"],
            gate_radius=d["gate_radius"],
            promote_threshold=d["promote_threshold"],
            drop_threshold=d["drop_threshold"],
            std_floor=d["std_floor"],
        )
        dct.outlier_count = d["outlier_count"]
        dct.clock = d["clock"]
        dct._next_id = d["next_id"]
        g = d["global"]
        dct._g_count = g["count"]
        dct._g_mean = None if g["mean"] is None else np.asarray(g["mean"])
        dct._g_m2 = None if g["m2"] is None else np.asarray(g["m2"])
        for e in d["entries"]:
            entry = DictEntry(
                eid=e["eid"],
                kind=e["kind"],
                count=e["count"],
                last_hit=e["last_hit"],
                provisional=e["provisional"],
                symbol=e["symbol"],
                mean=None if e["mean"] is None else np.asarray(e["mean"]),
                _m2=None if e["m2"] is None else np.asarray(e["m2"]),
            )
            dct.entries[entry.eid] = entry
            if entry.symbol is not None:
                dct._symbols[entry.symbol] = entry.eid
        return dct


@dataclass
class DictHistogram:
    """Counts over dictionary entries for one stream interval."""

    t_start: int
    t_end: int
    dict_name: str
    counts: dict[int, int] = field(default_factory=dict)
    outlier: int = 0

    def add(self, eid: int, count: int = 1) -> None:
        if eid == OUTLIER_BIN:
            self.outlier += count
        else:
            self.counts[eid] = self.counts.get(eid, 0) + count

    def total(self) -> int:
        return sum(self.counts.values()) + self.outlier

    def apply_remap(self, remap: dict[int, int]) -> None:
        """Follow a dictionary compaction so bins stay consistent."""
        moved: dict[int, int] = {}
        for eid, c in self.counts.items():
            new = remap.get(eid, eid)
            if new == OUTLIER_BIN:
                self.outlier += c
            else:
                moved[new] = moved.get(new, 0) + c
        self.counts = moved


def merge_histograms(
    h1: DictHistogram, h2: DictHistogram, mapping: dict[int, int] | None = None
) -> DictHistogram:
    """Bin-wise sum; histograms must share a dictionary or supply a mapping."""
    if h1.dict_name != h2.dict_name and mapping is None:
        raise DictionaryMismatch(f"dictionaries {h1.dict_name!r} and {h2.dict_name!r} differ")
    out = DictHistogram(
        t_start=min(h1.t_start, h2.t_start),
        t_end=max(h1.t_end, h2.t_end),
        dict_name=h1.dict_name,
        counts=dict(h1.counts),
        outlier=h1.outlier + h2.outlier,
    )
    for eid, c in h2.counts.items():
        if mapping is not None:
            eid = mapping.get(eid, eid)
        if eid == OUTLIER_BIN:
            out.outlier += c
        else:
            out.counts[eid] = out.counts.get(eid, 0) + c
    return out
