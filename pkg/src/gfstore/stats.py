"""Mergeable summary statistics.

A :class:`SummarySample` bundles every statistic kept for one stream
interval: count, weighted mean, population variance, extrema, and the
optional histogram / covariance / convex hull / scale-wise variance.
All of them obey the same contract: merging the summaries of two disjoint
blocks gives exactly the summary of their union, so summaries can be
rescaled forever without touching raw data again.

Medians and other non-mergeable quantities are deliberately absent.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import spectrum
from .errors import ChannelMismatch, DictionaryMismatch, NegativeWeight

#: Histogram bin id reserved for out-of-range / dropped-entry counts.
OUTLIER_BIN = -1


@dataclass(frozen=True)
class StatisticSet:
    """Which optional statistics to compute alongside count/mean/var/extrema."""

    covariance: bool = False
    hull: bool = False
    histogram_edges: tuple[float, ...] | None = None
    swv: bool = False
    family_hint: str | None = None

    def edges_array(self) -> np.ndarray | None:
        if self.histogram_edges is None:
            return None
        return np.asarray(self.histogram_edges, dtype=np.float64)


@dataclass(eq=False)
class SummarySample:
    """Statistics of one half-open interval [t_start, t_end) of the stream.

    ``n`` is the true raw cardinality; ``weight`` is the mean per-raw weight,
    so the effective count used in weighted formulas is ``n * weight``.
    A zero weight excludes the interval from every statistic while keeping
    the fact that the data existed.

    ``variance``/``min_v``/``max_v`` may be None after a curation drop; an
    empty sample (n == 0) instead carries the neutral values (zero moments,
    +inf/-inf extrema) so merges need no special cases.

    ``skewness``/``kurtosis`` are reserved slots: no merge law is
    implemented for them and merges drop them.
    """

    t_start: int
    t_end: int
    n: int
    mean: np.ndarray
    variance: np.ndarray | None
    min_v: np.ndarray | None
    max_v: np.ndarray | None
    weight: float = 1.0
    covariance: np.ndarray | None = None
    hull: np.ndarray | None = None
    histogram: dict[int, int] | None = None
    hist_edges: np.ndarray | None = None
    dict_id: str | None = None
    swv: np.ndarray | None = None
    family_hint: str | None = None
    skewness: np.ndarray | None = None
    kurtosis: np.ndarray | None = None
    sid: int = -1
    notes: tuple[str, ...] = ()

    @property
    def channels(self) -> int:
        return self.mean.shape[0]

    @property
    def effective(self) -> float:
        """Effective (weighted) count."""
        return self.n * self.weight

    def copy(self) -> "SummarySample":
        return dataclasses.replace(
            self,
            mean=self.mean.copy(),
            variance=None if self.variance is None else self.variance.copy(),
            min_v=None if self.min_v is None else self.min_v.copy(),
            max_v=None if self.max_v is None else self.max_v.copy(),
            covariance=None if self.covariance is None else self.covariance.copy(),
            hull=None if self.hull is None else self.hull.copy(),
            histogram=None if self.histogram is None else dict(self.histogram),
            hist_edges=None if self.hist_edges is None else self.hist_edges.copy(),
            swv=None if self.swv is None else self.swv.copy(),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, SummarySample):
            return NotImplemented

        def arr_eq(x, y):
            if x is None or y is None:
                return x is None and y is None
            return x.shape == y.shape and np.array_equal(x, y)

        return (
            self.t_start == other.t_start
            and self.t_end == other.t_end
            and self.n == other.n
            and self.weight == other.weight
            and arr_eq(self.mean, other.mean)
            and arr_eq(self.variance, other.variance)
            and arr_eq(self.min_v, other.min_v)
            and arr_eq(self.max_v, other.max_v)
            and arr_eq(self.covariance, other.covariance)
            and arr_eq(self.hull, other.hull)
            and self.histogram == other.histogram
            and arr_eq(self.hist_edges, other.hist_edges)
            and self.dict_id == other.dict_id
            and arr_eq(self.swv, other.swv)
            and self.family_hint == other.family_hint
            and self.sid == other.sid
            and self.notes == other.notes
        )


def empty(channels: int = 1, t: int = 0) -> SummarySample:
    """The neutral element: merging with it is an exact identity."""
    d = channels
    return SummarySample(
        t_start=t,
        t_end=t,
        n=0,
        mean=np.zeros(d),
        variance=np.zeros(d),
        min_v=np.full(d, np.inf),
        max_v=np.full(d, -np.inf),
    )


def summarize(raw, t_start: int = 0, opts: StatisticSet | None = None) -> SummarySample:
    """Compute the statistics of a raw block directly.

    This is the reference path that every chain of merges must agree with.
    """
    opts = opts or StatisticSet()
    x = np.asarray(raw, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, np.newaxis]
    if x.ndim != 2:
        raise ValueError("raw data must be an N x d matrix")
    n, d = x.shape
    if n == 0:
        s = empty(d, t_start)
        return s
    s = SummarySample(
        t_start=t_start,
        t_end=t_start + n,
        n=n,
        mean=x.mean(axis=0),
        variance=x.var(axis=0),
        min_v=x.min(axis=0),
        max_v=x.max(axis=0),
        family_hint=opts.family_hint,
    )
    if opts.covariance:
        centered = x - s.mean
        s.covariance = centered.T @ centered / n
    if opts.hull and d == 2:
        s.hull = convex_hull(x)
    edges = opts.edges_array()
    if edges is not None:
        counts, _ = np.histogram(x[:, 0], bins=edges)
        hist = {i: int(c) for i, c in enumerate(counts) if c}
        out = n - int(counts.sum())
        if out:
            hist[OUTLIER_BIN] = out
        s.histogram = hist
        s.hist_edges = edges
    if opts.swv:
        s.swv = spectrum.swv_ladder(x).terms
    return s


def point_sample(row, t: int, opts: StatisticSet | None = None) -> SummarySample:
    """Fast path for a single observation (the level-0 sample of a record)."""
    opts = opts or StatisticSet()
    v = np.atleast_1d(np.asarray(row, dtype=np.float64))
    d = v.shape[0]
    s = SummarySample(
        t_start=t,
        t_end=t + 1,
        n=1,
        mean=v.copy(),
        variance=np.zeros(d),
        min_v=v.copy(),
        max_v=v.copy(),
        family_hint=opts.family_hint,
    )
    if opts.covariance:
        s.covariance = np.zeros((d, d))
    if opts.hull and d == 2:
        s.hull = v[np.newaxis, :].copy()
    edges = opts.edges_array()
    if edges is not None:
        i = int(np.searchsorted(edges, v[0], side="right")) - 1
        if i == len(edges) - 1 and v[0] == edges[-1]:
            i -= 1  # histogram's last bin is closed on the right
        if 0 <= i < len(edges) - 1:
            s.histogram = {i: 1}
        else:
            s.histogram = {OUTLIER_BIN: 1}
        s.hist_edges = edges
    if opts.swv:
        s.swv = np.zeros((0, d))
    return s


def convex_hull(points) -> np.ndarray:
    """Convex hull of 2D points via the monotone chain, counter-clockwise.

    Degenerate inputs collapse: one distinct point gives a 1-vertex hull,
    collinear points a 2-vertex segment.
    """
    pts = np.unique(np.asarray(points, dtype=np.float64).reshape(-1, 2), axis=0)
    if pts.shape[0] <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[np.ndarray] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[np.ndarray] = []
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if not hull:  # all points collinear
        return np.vstack([pts[0], pts[-1]])
    if len(hull) == 1:
        return hull[0][np.newaxis, :]
    return np.vstack(hull)


def merge_hull(h1, h2) -> np.ndarray:
    """Hull of the union: the hull of both vertex sets together."""
    a = np.asarray(h1, dtype=np.float64).reshape(-1, 2)
    b = np.asarray(h2, dtype=np.float64).reshape(-1, 2)
    if a.shape[0] == 0:
        return convex_hull(b) if b.shape[0] else b
    if b.shape[0] == 0:
        return convex_hull(a)
    return convex_hull(np.vstack([a, b]))


def hull_contains(hull: np.ndarray, point, *, margin: float = 0.0) -> bool:
    """Inclusive point-in-convex-polygon test (CCW hull, degenerates allowed).

    ``margin`` loosens the test; pruning callers pass a small positive value
    so roundoff can only ever produce false positives, never false negatives.
    """
    q = np.asarray(point, dtype=np.float64)
    m = hull.shape[0]
    if m == 0:
        return False
    if m == 1:
        return bool(np.all(np.abs(hull[0] - q) <= margin))
    if m == 2:
        a, b = hull[0], hull[1]
        ab = b - a
        cross = ab[0] * (q[1] - a[1]) - ab[1] * (q[0] - a[0])
        if abs(cross) > margin:
            return False
        t = np.dot(q - a, ab)
        return -margin <= t <= np.dot(ab, ab) + margin
    for i in range(m):
        a = hull[i]
        b = hull[(i + 1) % m]
        cross = (b[0] - a[0]) * (q[1] - a[1]) - (b[1] - a[1]) * (q[0] - a[0])
        if cross < -margin:
            return False
    return True


def apply_weight(x: SummarySample, w: float) -> SummarySample:
    """Scale the sample's weight; w = 0 excludes it from future merges."""
    if w < 0:
        raise NegativeWeight(f"weight {w} < 0")
    return dataclasses.replace(x.copy(), weight=x.weight * w)


def _merged_interval(a: SummarySample, b: SummarySample, allow_gap: bool):
    if b.t_end <= a.t_start:
        a, b = b, a
    if a.t_end > b.t_start:
        raise ValueError(f"intervals overlap: [{a.t_start},{a.t_end}) and [{b.t_start},{b.t_end})")
    if a.t_end != b.t_start and not allow_gap:
        raise ValueError("samples are not adjacent (pass allow_gap=True for episodic merges)")
    return a, b


def merge(a: SummarySample, b: SummarySample, *, allow_gap: bool = False) -> SummarySample:
    """Merge adjacent summaries into the summary of the union interval.

    Optional statistics survive only when present on both sides; a drop is
    recorded in the result's notes so provenance is never silent.  Merging
    with the empty sample is an exact identity.
    """
    if a.mean.shape[0] != b.mean.shape[0]:
        raise ChannelMismatch(f"channels {a.mean.shape[0]} != {b.mean.shape[0]}")
    a, b = _merged_interval(a, b, allow_gap)
    t0, t1 = a.t_start, b.t_end

    if a.n == 0 or b.n == 0:
        keep = b if a.n == 0 else a
        other = a if a.n == 0 else b
        out = keep.copy()
        out.t_start, out.t_end = t0, t1
        out.sid = -1
        if other.notes:
            out.notes = tuple(dict.fromkeys(keep.notes + other.notes))
        return out

    live_a = a.weight > 0
    live_b = b.weight > 0
    n = a.n + b.n
    eff = a.effective + b.effective

    if not (live_a and live_b):
        if live_a or live_b:
            keep = a if live_a else b
            dead = b if live_a else a
            out = keep.copy()
            out.t_start, out.t_end = t0, t1
            out.n = n
            out.weight = eff / n
            out.sid = -1
            out.notes = tuple(
                dict.fromkeys(
                    keep.notes
                    + dead.notes
                    + (f"[{dead.t_start},{dead.t_end}) excluded (zero weight)",)
                )
            )
            return out
        out = empty(a.channels)
        out.t_start, out.t_end = t0, t1
        out.n = n
        out.weight = 0.0
        out.notes = tuple(dict.fromkeys(a.notes + b.notes + ("all data zero-weighted",)))
        return out

    ea, eb = a.effective, b.effective
    mean = (ea * a.mean + eb * b.mean) / eff
    dropped: list[str] = []

    def both(name, xa, xb):
        if xa is None or xb is None:
            if xa is not None or xb is not None:
                dropped.append(name)
            return False
        return True

    out = SummarySample(t_start=t0, t_end=t1, n=n, mean=mean, variance=None, min_v=None, max_v=None)
    out.weight = eff / n

    da = a.mean - mean
    db = b.mean - mean
    if both("variance", a.variance, b.variance):
        out.variance = (ea * (a.variance + da * da) + eb * (b.variance + db * db)) / eff
    if both("min", a.min_v, b.min_v):
        out.min_v = np.minimum(a.min_v, b.min_v)
    if both("max", a.max_v, b.max_v):
        out.max_v = np.maximum(a.max_v, b.max_v)
    if both("covariance", a.covariance, b.covariance):
        out.covariance = (
            ea * (a.covariance + np.outer(da, da)) + eb * (b.covariance + np.outer(db, db))
        ) / eff
    if both("hull", a.hull, b.hull):
        out.hull = merge_hull(a.hull, b.hull)
    if both("histogram", a.histogram, b.histogram):
        if a.dict_id != b.dict_id:
            raise DictionaryMismatch(f"dictionary {a.dict_id!r} != {b.dict_id!r}")
        if (a.hist_edges is None) != (b.hist_edges is None) or (
            a.hist_edges is not None and not np.array_equal(a.hist_edges, b.hist_edges)
        ):
            raise DictionaryMismatch("histogram bin edges differ")
        hist = dict(a.histogram)
        for k, v in b.histogram.items():
            hist[k] = hist.get(k, 0) + v
        out.histogram = hist
        out.hist_edges = None if a.hist_edges is None else a.hist_edges.copy()
        out.dict_id = a.dict_id
    if both("swv", a.swv, b.swv):
        out.swv = spectrum.pool_terms(a.swv, a.mean, ea, b.swv, b.mean, eb, mean)
    if a.family_hint == b.family_hint:
        out.family_hint = a.family_hint

    notes = a.notes + b.notes
    if dropped:
        notes = notes + (f"dropped {','.join(dropped)} on merge at [{t0},{t1})",)
    out.notes = tuple(dict.fromkeys(notes))
    return out


def merge_all(samples, *, allow_gap: bool = False) -> SummarySample:
    """Left fold of :func:`merge` over a time-ordered sequence."""
    it = iter(samples)
    try:
        acc = next(it).copy()
    except StopIteration:
        raise ValueError("merge_all needs at least one sample") from None
    for s in it:
        acc = merge(acc, s, allow_gap=allow_gap)
    return acc


def scalar_cost(s: SummarySample) -> tuple[int, int]:
    """(floats, ints) stored by this sample; used for size accounting."""
    d = s.channels
    floats = d + 1  # mean + weight
    ints = 3  # t_start, t_end, n
    for v in (s.variance, s.min_v, s.max_v):
        if v is not None:
            floats += d
    if s.covariance is not None:
        floats += d * (d + 1) // 2
    if s.hull is not None:
        floats += 2 * s.hull.shape[0]
    if s.histogram is not None:
        ints += 2 * len(s.histogram)
        if s.hist_edges is not None:
            floats += s.hist_edges.shape[0]
    if s.swv is not None:
        floats += s.swv.size
    return floats, ints
