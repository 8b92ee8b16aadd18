"""Curation: heuristic merge scoring, statistic drop ranking, compaction.

The rules travel with the record, so any future process can resume the
same policy.  All heuristic weights default to zero: with nothing tuned,
behaviour reduces exactly to the pure recency scheme (oldest pair merges
first).  Weights are static configuration; learning them from feedback is
out of scope here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import compare, stats
from .errors import CannotSatisfyBudget, TooFewSamples, UnknownId

#: Statistics a forced drop may remove, in canonical id order (ties in the
#: KL ranking resolve alphabetically).  Count and mean are never droppable.
DROPPABLE = ("covariance", "extrema", "histogram", "hull", "swv", "variance")


@dataclass
class CurationRules:
    """Policy stored with the data: budget, heuristic weights, thresholds.

    Recency is implicit and always on (it is the tie-break of the merge
    ranking).  ``max_scalars``, when set, bounds the total number of stored
    scalars; forced statistic drops only happen under that bound.
    """

    budget_slots: int = 64
    nonstationarity_w: float = 0.0
    slowness_w: float = 0.0
    recurrence_reprieve_w: float = 0.0
    prior_access_w: float = 0.0
    kl_tau: float = 0.1
    access_half_life: float = 16.0
    dict_gate_radius: float = 3.0
    dict_promote_threshold: int = 3
    dict_drop_threshold: int = 2
    max_scalars: int | None = None
    drop_priority: tuple[str, ...] | None = None

    def tuned(self) -> bool:
        return any(
            w > 0
            for w in (
                self.nonstationarity_w,
                self.slowness_w,
                self.recurrence_reprieve_w,
                self.prior_access_w,
            )
        )

    def copy(self) -> "CurationRules":
        return replace(self)


class AccessLog:
    """Per-sample usage counters with exponential decay.

    Time is measured in compaction cycles; counters halve every
    ``half_life`` cycles.  Merged samples pool their counters.
    """

    def __init__(self, half_life: float = 16.0):
        self.half_life = float(half_life)
        self.tick = 0
        self._counts: dict[int, tuple[float, int]] = {}

    def register(self, sid: int) -> None:
        if sid not in self._counts:
            self._counts[sid] = (0.0, self.tick)

    def forget(self, sid: int) -> None:
        self._counts.pop(sid, None)

    def known(self, sid: int) -> bool:
        return sid in self._counts

    def count(self, sid: int) -> float:
        entry = self._counts.get(sid)
        if entry is None:
            return 0.0
        value, last = entry
        if value == 0.0:
            return 0.0
        return value * 0.5 ** ((self.tick - last) / self.half_life)

    def record(self, sids) -> None:
        for sid in sids:
            if sid not in self._counts:
                raise UnknownId(f"sample id {sid} is not registered")
            self._counts[sid] = (self.count(sid) + 1.0, self.tick)

    def pool(self, sids, new_sid: int) -> None:
        total = 0.0
        for sid in sids:
            total += self.count(sid)
            self._counts.pop(sid, None)
        self._counts[new_sid] = (total, self.tick)

    def advance(self, cycles: int = 1) -> None:
        self.tick += cycles

    def to_dict(self) -> dict:
        return {
            "half_life": self.half_life,
            "tick": self.tick,
            "counts": {str(k): [v, t] for k, (v, t) in sorted(self._counts.items())},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AccessLog":
        log = cls(half_life=d.get("half_life", 16.0))
        log.tick = int(d.get("tick", 0))
        log._counts = {int(k): (float(v[0]), int(v[1])) for k, v in d.get("counts", {}).items()}
        return log


def record_access(log: AccessLog, sids) -> AccessLog:
    """Bump the usage counters of the given samples."""
    log.record(sids)
    return log


@dataclass
class ScoredPair:
    index: int  # pair = (index, index + 1) within the level
    score: float


def _fast_share(s: stats.SummarySample) -> float:
    if s.swv is None or s.swv.shape[0] == 0:
        return 0.0
    total = float(s.swv.sum())
    if total <= 0:
        return 0.0
    return float(s.swv[:2].sum()) / total


def _dict_bonus(s: stats.SummarySample) -> float:
    if s.histogram is None or s.n == 0:
        return 0.0
    hits = sum(v for k, v in s.histogram.items() if k != stats.OUTLIER_BIN)
    return hits / s.n


def score_merge_candidates(samples, rules: CurationRules, log: AccessLog | None = None):
    """Rank adjacent pairs in the oldest quartile; lowest score merges first.

    score = nonstationarity_w * symmetric KL        (similar pairs go first)
          + prior_access_w    * pooled access count (used data get reprieve)
          + recurrence_w      * dictionary-hit share(recurring patterns too)
          - slowness_w        * fast-scale SWV share(erratic data go early)

    Ties break toward the oldest pair, which is the whole policy when all
    weights are zero.
    """
    m = len(samples)
    if m < 2:
        raise TooFewSamples(f"need >= 2 samples, got {m}")
    quartile = max(1, m // 4)
    ranked: list[ScoredPair] = []
    for i in range(min(quartile, m - 1)):
        a, b = samples[i], samples[i + 1]
        score = 0.0
        if rules.nonstationarity_w > 0:
            score += rules.nonstationarity_w * compare.symmetric_merge_score(a, b)
        if rules.prior_access_w > 0 and log is not None:
            score += rules.prior_access_w * (log.count(a.sid) + log.count(b.sid))
        if rules.recurrence_reprieve_w > 0:
            score += rules.recurrence_reprieve_w * 0.5 * (_dict_bonus(a) + _dict_bonus(b))
        if rules.slowness_w > 0:
            score -= rules.slowness_w * 0.5 * (_fast_share(a) + _fast_share(b))
        ranked.append(ScoredPair(i, score))
    ranked.sort(key=lambda p: (p.score, p.index))
    return ranked


def _single_stat_model(s: stats.SummarySample, name: str) -> compare.DistributionModel | None:
    d = s.channels
    if name == "variance" and s.variance is not None:
        return compare.gaussian_model(np.zeros(d), s.variance)
    if name == "extrema" and s.min_v is not None and s.max_v is not None:
        return compare.uniform_model(s.min_v, s.max_v)
    if name == "histogram" and s.histogram is not None and s.hist_edges is not None:
        counts = np.zeros(s.hist_edges.shape[0] - 1)
        for k, v in s.histogram.items():
            if k != stats.OUTLIER_BIN:
                counts[k] = v
        if counts.sum() <= 0:
            return None
        return compare.piecewise_model(s.hist_edges, counts)
    if name == "covariance" and s.covariance is not None:
        if d == 1:
            return compare.gaussian_model(np.zeros(1), s.covariance.reshape(1))
        return compare.gaussian_model(np.zeros(d), cov=s.covariance)
    if name == "hull" and s.hull is not None:
        return compare.uniform_model(s.hull.min(axis=0), s.hull.max(axis=0))
    if name == "swv" and s.swv is not None and s.swv.shape[0] > 0:
        total = s.swv.sum()
        if total <= 0:
            return None
        probs = s.swv.sum(axis=1) / total
        k = probs.shape[0]
        return compare.piecewise_model(np.arange(k + 1, dtype=np.float64), probs)
    return None


def rank_statistics_for_drop(samples) -> list[tuple[str, float]]:
    """Order droppable statistics by how little they discriminate.

    For each statistic present on every sample, a model is built from that
    statistic alone and the mean symmetric KL over adjacent pairs computed.
    The least discriminative statistic comes first (drop it first).  Count
    and mean are never candidates.
    """
    samples = list(samples)
    if len(samples) < 2:
        raise TooFewSamples("drop ranking needs at least two samples")
    rows: list[tuple[float, str]] = []
    for name in DROPPABLE:
        models = []
        ok = True
        for s in samples:
            m = _single_stat_model(s, name)
            if m is None:
                ok = False
                break
            models.append(m)
        if not ok:
            continue
        total = 0.0
        pairs = 0
        for ma, mb in zip(models[:-1], models[1:]):
            total += min(compare.kl_divergence(ma, mb), compare.KL_CAP)
            total += min(compare.kl_divergence(mb, ma), compare.KL_CAP)
            pairs += 1
        rows.append((total / pairs, name))
    rows.sort(key=lambda r: (r[0], r[1]))
    return [(name, score) for score, name in rows]


def _drop_statistic(sample: stats.SummarySample, name: str) -> bool:
    """Remove one statistic from a sample in place; True if anything changed."""
    if name == "variance" and sample.variance is not None:
        sample.variance = None
        return True
    if name == "extrema" and (sample.min_v is not None or sample.max_v is not None):
        sample.min_v = None
        sample.max_v = None
        return True
    if name == "histogram" and sample.histogram is not None:
        sample.histogram = None
        sample.hist_edges = None
        sample.dict_id = None
        return True
    if name == "covariance" and sample.covariance is not None:
        sample.covariance = None
        return True
    if name == "hull" and sample.hull is not None:
        sample.hull = None
        return True
    if name == "swv" and sample.swv is not None:
        sample.swv = None
        return True
    return False


def compact(record, rules: CurationRules | None = None, log: AccessLog | None = None):
    """Bring the record within budget; a within-budget record is untouched.

    Slot pressure is always resolvable by merging, so the scalar bound
    (``rules.max_scalars``) is what triggers statistic drops: the least
    discriminative statistic is removed from the oldest level first, and
    count+mean always survive.
    """
    rules = rules if rules is not None else record.rules
    log = log if log is not None else record.access_log
    if rules.budget_slots < 1:
        raise CannotSatisfyBudget("budget must be at least one slot")

    over_slots = record.slots() > rules.budget_slots
    over_scalars = rules.max_scalars is not None and record.scalar_footprint() > rules.max_scalars
    if not (over_slots or over_scalars):
        return record  # lazy: nothing to do, nothing is touched

    log.advance()
    if over_slots:
        record.rebalance(rules=rules, log=log, reason="compact")

    if rules.max_scalars is not None:
        while record.scalar_footprint() > rules.max_scalars:
            dropped = False
            for level in range(len(record.levels) - 1, -1, -1):
                samples = record.levels[level]
                if not samples:
                    continue
                if rules.drop_priority is not None:
                    order = [(name, 0.0) for name in rules.drop_priority]
                elif len(samples) >= 2:
                    order = rank_statistics_for_drop(samples)
                else:
                    order = [(name, 0.0) for name in DROPPABLE]
                for name, _ in order:
                    changed = False
                    for s in samples:
                        changed = _drop_statistic(s, name) or changed
                    if changed:
                        record.provenance.append(
                            {"op": "drop_statistic", "statistic": name, "level": level}
                        )
                        dropped = True
                        break
                if dropped:
                    break
            if not dropped:
                raise CannotSatisfyBudget(
                    f"scalar footprint {record.scalar_footprint()} > {rules.max_scalars} "
                    "with nothing left to drop"
                )
    return record
