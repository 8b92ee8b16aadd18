"""Distribution models over summaries and KL-divergence comparison.

Summaries are turned into parametric distributions (uniform from extrema,
gaussian from mean+variance, piecewise-uniform from a histogram) and
compared with closed-form Kullback-Leibler divergences.  An infinite
divergence is a legitimate answer: it certifies that one dataset cannot
be a subset of the other.  Finite small values only *corroborate* a
subset or equality relation; raw data would be needed to confirm it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ChannelMismatch, EmptySample, SingularMatrix
from .stats import OUTLIER_BIN, SummarySample

#: Finite stand-in for infinite divergences when ranking merge candidates.
KL_CAP = 1e9

#: Probability floor applied to empirical (piecewise) reference cells that
#: are inside the reference support but empty; guards numerical noise while
#: keeping genuine support mismatches infinite.
EPS_FLOOR = 1e-12

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class DistributionModel:
    """One parametric family fitted from summary statistics.

    family is one of "uniform", "gaussian", "piecewise", "point".
    Uniform and gaussian models may span several channels (treated as a
    product of independent channels, or a full-covariance gaussian when
    ``cov`` is set).  Piecewise models are single-channel.
    """

    family: str
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    mean: np.ndarray | None = None
    var: np.ndarray | None = None
    cov: np.ndarray | None = None
    edges: np.ndarray | None = None
    probs: np.ndarray | None = None
    loc: np.ndarray | None = None
    source: str = ""

    @property
    def channels(self) -> int:
        if self.family == "uniform":
            return self.lo.shape[0]
        if self.family == "gaussian":
            return self.mean.shape[0]
        if self.family == "point":
            return self.loc.shape[0]
        return 1


def uniform_model(lo, hi, source: str = "extrema") -> DistributionModel:
    lo = np.atleast_1d(np.asarray(lo, dtype=np.float64))
    hi = np.atleast_1d(np.asarray(hi, dtype=np.float64))
    if np.any(hi < lo):
        raise ValueError("uniform requires hi >= lo")
    if np.all(hi == lo):
        return DistributionModel(family="point", loc=lo.copy(), source=source)
    return DistributionModel(family="uniform", lo=lo, hi=hi, source=source)


def gaussian_model(mean, var=None, cov=None, source: str = "mean+variance") -> DistributionModel:
    mean = np.atleast_1d(np.asarray(mean, dtype=np.float64))
    if cov is not None:
        cov = np.asarray(cov, dtype=np.float64)
        if mean.shape[0] == 1:  # scalar covariance is just a variance
            var, cov = cov.reshape(1), None
        else:
            var = np.diag(cov).copy()
    elif var is None:
        raise ValueError("gaussian needs var or cov")
    else:
        var = np.atleast_1d(np.asarray(var, dtype=np.float64))
    if np.any(var < 0):
        raise ValueError("variance must be >= 0")
    if np.all(var == 0):
        return DistributionModel(family="point", loc=mean.copy(), source=source)
    return DistributionModel(family="gaussian", mean=mean, var=var, cov=cov, source=source)


def piecewise_model(edges, probs, source: str = "histogram") -> DistributionModel:
    edges = np.asarray(edges, dtype=np.float64)
    probs = np.asarray(probs, dtype=np.float64)
    if edges.ndim != 1 or edges.shape[0] != probs.shape[0] + 1:
        raise ValueError("need K+1 edges for K probabilities")
    if np.any(np.diff(edges) <= 0):
        raise ValueError("edges must be strictly increasing")
    if np.any(probs < 0):
        raise ValueError("probabilities must be >= 0")
    total = probs.sum()
    if total <= 0:
        raise ValueError("piecewise model has no mass")
    probs = probs / total
    return DistributionModel(family="piecewise", edges=edges, probs=probs, source=source)


def point_model(loc, source: str = "mean") -> DistributionModel:
    loc = np.atleast_1d(np.asarray(loc, dtype=np.float64))
    return DistributionModel(family="point", loc=loc, source=source)


def model_from_sample(s: SummarySample, family: str | None = None) -> DistributionModel:
    """Parametrize the sample's empirical distribution.

    Family resolution: explicit override, else the sample's own hint, else
    histogram -> piecewise (single channel), mean+variance -> gaussian,
    extrema alone -> uniform, bare mean -> point mass.
    """
    if s.n == 0:
        raise EmptySample("cannot model an empty sample")
    fam = family or s.family_hint
    if fam is None:
        if s.histogram is not None and s.hist_edges is not None and s.channels == 1:
            fam = "piecewise"
        elif s.variance is not None:
            fam = "gaussian"
        elif s.min_v is not None and s.max_v is not None:
            fam = "uniform"
        else:
            fam = "point"
    if fam == "piecewise":
        if s.histogram is None or s.hist_edges is None:
            raise ValueError("piecewise model needs a histogram with numeric edges")
        counts = np.zeros(s.hist_edges.shape[0] - 1)
        for k, v in s.histogram.items():
            if k != OUTLIER_BIN:
                counts[k] = v
        if counts.sum() <= 0:  # everything fell in the outlier bin
            if s.variance is not None:
                return gaussian_model(s.mean, s.variance)
            return uniform_model(s.min_v, s.max_v)
        return piecewise_model(s.hist_edges, counts)
    if fam == "gaussian":
        if s.variance is None:
            raise ValueError("gaussian model needs variance")
        return gaussian_model(s.mean, s.variance)
    if fam == "uniform":
        if s.min_v is None or s.max_v is None:
            raise ValueError("uniform model needs extrema")
        return uniform_model(s.min_v, s.max_v)
    if fam == "point":
        return point_model(s.mean)
    raise ValueError(f"unknown family {fam!r}")


# --- scalar (single channel) closed forms --------------------------------

def _kl_scalar(fa, pa, fb, pb) -> float:
    """KL between two scalar channel models given as (family, params)."""
    if fa == "point":
        x = pa
        if fb == "point":
            return 0.0 if x == pb else math.inf
        if fb == "uniform":
            a, b = pb
            return 0.0 if a <= x <= b else math.inf
        if fb == "gaussian":
            return 0.0  # positive density everywhere
        if fb == "piecewise":
            return 0.0 if _piecewise_density(pb[0], pb[1], x) > 0 else math.inf
    if fb == "point":
        return math.inf  # a spread distribution never fits inside a point
    if fa == "uniform":
        a1, b1 = pa
        if fb == "uniform":
            a2, b2 = pb
            if a1 >= a2 and b1 <= b2:
                return math.log((b2 - a2) / (b1 - a1))
            return math.inf
        if fb == "gaussian":
            mu, sg2 = pb
            w = b1 - a1
            m = 0.5 * (a1 + b1)
            return 0.5 * math.log(2.0 * math.pi * sg2) - math.log(w) + (w * w / 12.0 + (m - mu) ** 2) / (2.0 * sg2)
        if fb == "piecewise":
            return _kl_piecewise(np.array([a1, b1]), np.array([1.0]), pb[0], pb[1], floor_b=True)
    if fa == "gaussian":
        mu1, s1 = pa
        if fb == "gaussian":
            mu2, s2 = pb
            return 0.5 * ((s1 + (mu1 - mu2) ** 2) / s2 - 1.0 + math.log(s2 / s1))
        return math.inf  # unbounded support cannot fit a bounded model
    if fa == "piecewise":
        ea, qa = pa
        if fb == "uniform":
            a2, b2 = pb
            return _kl_piecewise(ea, qa, np.array([a2, b2]), np.array([1.0]), floor_b=False)
        if fb == "gaussian":
            mu, sg2 = pb
            widths = np.diff(ea)
            centers = 0.5 * (ea[:-1] + ea[1:])
            mask = qa > 0
            ent = float(np.sum(qa[mask] * np.log(qa[mask] / widths[mask])))
            quad = float(np.sum(qa * ((centers - mu) ** 2 + widths ** 2 / 12.0)))
            return ent + 0.5 * math.log(2.0 * math.pi * sg2) + quad / (2.0 * sg2)
        if fb == "piecewise":
            return _kl_piecewise(ea, qa, pb[0], pb[1], floor_b=True)
    raise ValueError(f"unsupported families {fa!r} || {fb!r}")


def _piecewise_density(edges, probs, x) -> float:
    if x < edges[0] or x > edges[-1]:
        return 0.0
    i = int(np.searchsorted(edges, x, side="right")) - 1
    i = min(max(i, 0), probs.shape[0] - 1)
    return float(probs[i] / (edges[i + 1] - edges[i]))


def _kl_piecewise(ea, qa, eb, qb, *, floor_b: bool) -> float:
    """Exact divergence between piecewise-constant densities on a common refinement."""
    lo_b, hi_b = float(eb[0]), float(eb[-1])
    grid = np.unique(np.concatenate([ea, eb]))
    grid = grid[(grid >= ea[0]) & (grid <= ea[-1])]
    total = 0.0
    wa = np.diff(ea)
    wb = np.diff(eb)
    for x0, x1 in zip(grid[:-1], grid[1:]):
        mid = 0.5 * (x0 + x1)
        ia = int(np.searchsorted(ea, mid, side="right")) - 1
        pa = qa[ia]
        if pa <= 0:
            continue
        da = pa / wa[ia]
        mass = da * (x1 - x0)
        if mid < lo_b or mid > hi_b:
            return math.inf
        ib = int(np.searchsorted(eb, mid, side="right")) - 1
        pb = qb[ib]
        if pb <= 0:
            if not floor_b:
                return math.inf
            pb = EPS_FLOOR
        db = pb / wb[ib]
        total += mass * math.log(da / db)
    return max(total, 0.0)


# --- model level dispatch -------------------------------------------------

def _scalar_channels(m: DistributionModel):
    """Split a product model into per-channel (family, params) tuples."""
    out = []
    for c in range(m.channels):
        if m.family == "point":
            out.append(("point", float(m.loc[c])))
        elif m.family == "uniform":
            lo, hi = float(m.lo[c]), float(m.hi[c])
            if hi == lo:
                out.append(("point", lo))
            else:
                out.append(("uniform", (lo, hi)))
        elif m.family == "gaussian":
            v = float(m.var[c])
            if v == 0:
                out.append(("point", float(m.mean[c])))
            else:
                out.append(("gaussian", (float(m.mean[c]), v)))
        elif m.family == "piecewise":
            out.append(("piecewise", (m.edges, m.probs)))
        else:
            raise ValueError(f"unknown family {m.family!r}")
    return out


def _kl_full_cov(a: DistributionModel, b: DistributionModel) -> float:
    """Closed forms involving a full-covariance gaussian reference."""
    d = b.mean.shape[0]
    cov_b = b.cov + np.eye(d) * (EPS_FLOOR * max(np.trace(b.cov) / d, 1.0))
    sign, logdet_b = np.linalg.slogdet(cov_b)
    if sign <= 0:
        return math.inf
    inv_b = np.linalg.inv(cov_b)
    if a.family == "point":
        return 0.0
    if a.family == "gaussian":
        cov_a = a.cov if a.cov is not None else np.diag(a.var)
        if np.all(np.diag(cov_a) == 0):
            return 0.0
        cov_a = cov_a + np.eye(d) * (EPS_FLOOR * max(np.trace(cov_a) / d, 1.0))
        sign_a, logdet_a = np.linalg.slogdet(cov_a)
        if sign_a <= 0:
            return math.inf
        delta = b.mean - a.mean
        return max(0.0, 0.5 * (np.trace(inv_b @ cov_a) + delta @ inv_b @ delta - d + logdet_b - logdet_a))
    if a.family == "uniform":
        w = a.hi - a.lo
        vol = float(np.prod(w[w > 0]))
        delta = 0.5 * (a.lo + a.hi) - b.mean
        c_box = np.diag(w * w / 12.0)
        quad = float(np.trace(inv_b @ c_box) + delta @ inv_b @ delta)
        return -math.log(vol) + 0.5 * (d * _LOG_2PI + logdet_b) + 0.5 * quad
    raise ValueError(f"unsupported pair {a.family!r} || gaussian(cov)")


def kl_divergence(a: DistributionModel, b: DistributionModel) -> float:
    """D(a || b) in nats; >= 0, and +inf exactly when a's support exceeds b's."""
    if a.channels != b.channels:
        raise ChannelMismatch(f"model channels {a.channels} != {b.channels}")
    if b.family == "gaussian" and b.cov is not None:
        return _kl_full_cov(a, b)
    if a.family == "gaussian" and a.cov is not None:
        if b.family == "gaussian":
            return _kl_full_cov(a, gaussian_model(b.mean, cov=np.diag(b.var)))
        if b.family == "point":
            return math.inf
        return math.inf  # unbounded support vs bounded reference
    total = 0.0
    for (fa, pa), (fb, pb) in zip(_scalar_channels(a), _scalar_channels(b)):
        term = _kl_scalar(fa, pa, fb, pb)
        if term == math.inf:
            return math.inf
        total += term
    return max(total, 0.0)


def pdf(m: DistributionModel, x) -> float:
    """Density of the model at x (product over channels)."""
    q = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if q.shape[0] != m.channels:
        raise ChannelMismatch(f"point has {q.shape[0]} channels, model {m.channels}")
    if m.family == "gaussian" and m.cov is not None:
        d = m.channels
        cov = m.cov + np.eye(d) * (EPS_FLOOR * max(np.trace(m.cov) / d, 1.0))
        delta = q - m.mean
        sign, logdet = np.linalg.slogdet(cov)
        if sign <= 0:
            return 0.0
        quad = delta @ np.linalg.solve(cov, delta)
        return float(math.exp(-0.5 * (d * _LOG_2PI + logdet + quad)))
    out = 1.0
    for (fam, params), xc in zip(_scalar_channels(m), q):
        if fam == "point":
            out *= 1.0 if xc == params else 0.0
        elif fam == "uniform":
            a, b = params
            out *= 1.0 / (b - a) if a <= xc <= b else 0.0
        elif fam == "gaussian":
            mu, s2 = params
            out *= math.exp(-0.5 * (xc - mu) ** 2 / s2) / math.sqrt(2.0 * math.pi * s2)
        else:
            out *= _piecewise_density(params[0], params[1], xc)
    return out


# --- verdicts and merge scores --------------------------------------------

VERDICT_EQUAL = "plausibly_equal"
VERDICT_SUBSET = "plausible_subset"
VERDICT_NOT_SUBSET = "not_subset"
VERDICT_DISTINCT = "distinct"


@dataclass
class Verdict:
    verdict: str
    d_ab: float
    d_ba: float
    note: str = ""


def verdict_from_models(ma: DistributionModel, mb: DistributionModel, tau: float = 0.1) -> Verdict:
    d_ab = kl_divergence(ma, mb)
    d_ba = kl_divergence(mb, ma)
    if d_ab == math.inf:
        v, note = VERDICT_NOT_SUBSET, "support of A exceeds B"
    elif d_ab <= tau and d_ba <= tau:
        v, note = VERDICT_EQUAL, "corroborated, not confirmed: raw data are gone"
    elif d_ab <= tau < d_ba:
        v, note = VERDICT_SUBSET, "A plausibly fits within B"
    else:
        v, note = VERDICT_DISTINCT, ""
    return Verdict(v, d_ab, d_ba, note)


def subset_verdict(a: SummarySample, b: SummarySample, tau: float = 0.1,
                   family: str | None = None) -> Verdict:
    """Judge whether dataset A plausibly sits inside dataset B."""
    return verdict_from_models(model_from_sample(a, family), model_from_sample(b, family), tau)


def symmetric_merge_score(a: SummarySample, b: SummarySample, family: str | None = None,
                          cap: float = KL_CAP) -> float:
    """D(a||b) + D(b||a) with infinities clamped to a finite ranking cap."""
    ma = model_from_sample(a, family)
    mb = model_from_sample(b, family)
    return min(kl_divergence(ma, mb), cap) + min(kl_divergence(mb, ma), cap)


def joint_diagonalize(c1, c2):
    """Find W with W.T @ C1 @ W = I and W.T @ C2 @ W diagonal.

    Eigenvalues are returned descending, so the leading columns span the
    subspace where the two covariances differ most.  C1 is regularized with
    1e-9 * trace/d before factorization.
    """
    c1 = np.asarray(c1, dtype=np.float64)
    c2 = np.asarray(c2, dtype=np.float64)
    if c1.shape != c2.shape or c1.ndim != 2 or c1.shape[0] != c1.shape[1]:
        raise ValueError("need two square matrices of equal shape")
    if not (np.all(np.isfinite(c1)) and np.all(np.isfinite(c2))):
        raise SingularMatrix("non-finite covariance input")
    d = c1.shape[0]
    reg = 1e-9 * np.trace(c1) / d
    if reg <= 0:
        raise SingularMatrix("C1 has non-positive trace")
    c1r = c1 + reg * np.eye(d)
    try:
        eigvals, w = scipy.linalg.eigh(c2, c1r)
    except (scipy.linalg.LinAlgError, np.linalg.LinAlgError) as exc:
        raise SingularMatrix(str(exc)) from exc
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    w = w[:, order]
    for j in range(d):  # deterministic sign convention
        k = int(np.argmax(np.abs(w[:, j])))
        if w[k, j] < 0:
            w[:, j] = -w[:, j]
    return w, eigvals
