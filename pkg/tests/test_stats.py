import numpy as np
import pytest

from gfstore import stats
from gfstore.errors import ChannelMismatch, DictionaryMismatch, NegativeWeight
from gfstore.stats import StatisticSet, apply_weight, merge, merge_all, merge_hull, summarize

RTOL = 1e-9

FULL = StatisticSet(covariance=True, histogram_edges=tuple(np.linspace(-4, 4, 17)))
FULL2D = StatisticSet(covariance=True, hull=True, histogram_edges=tuple(np.linspace(-4, 4, 17)))


def close(a, b, rtol=RTOL, atol=1e-12):
    return np.allclose(a, b, rtol=rtol, atol=atol)


def test_summarize_worked_example():
    s = summarize([1.0, 2.0, 3.0, 4.0])
    assert s.n == 4
    assert close(s.mean, [2.5])
    assert close(s.variance, [1.25])
    assert close(s.min_v, [1.0]) and close(s.max_v, [4.0])
    assert s.t_start == 0 and s.t_end == 4


def test_summarize_empty_and_constant():
    e = summarize(np.empty((0, 2)))
    assert e.n == 0
    assert np.all(np.isinf(e.min_v)) and np.all(np.isinf(e.max_v))
    c = summarize([7.0, 7.0, 7.0])
    assert c.n == 3 and close(c.mean, [7.0]) and close(c.variance, [0.0])
    assert close(c.min_v, [7.0]) and close(c.max_v, [7.0])


def test_merge_variance_worked_example():
    # {n=2,m=1,v=0.25} + {n=2,m=3,v=0.25} -> {n=4,m=2,v=1.25}; oracle is the
    # direct variance of the reconstructed multiset [0.5, 1.5, 2.5, 3.5]
    a = summarize([0.5, 1.5], t_start=0)
    b = summarize([2.5, 3.5], t_start=2)
    assert close(a.variance, [0.25]) and close(b.variance, [0.25])
    m = merge(a, b)
    assert m.n == 4
    assert close(m.mean, [2.0])
    assert close(m.variance, [np.var([0.5, 1.5, 2.5, 3.5])])
    assert close(m.variance, [1.25])


def test_merge_weighted_mean_example():
    a = summarize([0.0], t_start=0)
    b = summarize([4.0, 4.0, 4.0], t_start=1)
    m = merge(a, b)
    assert m.n == 4 and close(m.mean, [(0.0 * 1 + 4.0 * 3) / 4]) and close(m.mean, [3.0])


def test_merge_extrema_example():
    a = summarize([-1.0, 2.0], t_start=0)
    b = summarize([0.0, 5.0], t_start=2)
    m = merge(a, b)
    assert close(m.min_v, [-1.0]) and close(m.max_v, [5.0])


def test_merge_with_empty_is_identity():
    x = summarize(np.linspace(0, 1, 9), t_start=0, opts=FULL)
    e = stats.empty(1, t=9)
    m = merge(x, e)
    assert m == stats.merge(x, e)
    assert m.n == x.n and close(m.mean, x.mean) and close(m.variance, x.variance)
    assert m.histogram == x.histogram
    assert m.t_start == 0 and m.t_end == 9
    # empty on the left, too
    e0 = stats.empty(1, t=0)
    x1 = summarize(np.linspace(0, 1, 9), t_start=0, opts=FULL)
    m2 = merge(e0, x1)
    assert m2.n == x1.n and close(m2.mean, x1.mean)


def test_mergeability_on_random_splits():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(2, 400))
        d = int(rng.integers(1, 4))
        raw = rng.normal(size=(n, d))
        opts = StatisticSet(
            covariance=True,
            hull=(d == 2),
            histogram_edges=tuple(np.linspace(-4, 4, 9)),
            swv=True,
        )
        cut = int(rng.integers(1, n))
        whole = summarize(raw, opts=opts)
        m = merge(summarize(raw[:cut], opts=opts), summarize(raw[cut:], t_start=cut, opts=opts))
        assert m.n == whole.n
        assert close(m.mean, whole.mean)
        assert close(m.variance, whole.variance)
        assert close(m.min_v, whole.min_v) and close(m.max_v, whole.max_v)
        assert close(m.covariance, whole.covariance)
        assert m.histogram == whole.histogram
        if d == 2:
            assert close(m.hull, whole.hull)


def test_merge_associative_and_commutative_fields():
    rng = np.random.default_rng(11)
    raw = rng.normal(size=60)
    a = summarize(raw[:20], 0)
    b = summarize(raw[20:45], 20)
    c = summarize(raw[45:], 45)
    left = merge(merge(a, b), c)
    right = merge(a, merge(b, c))
    assert close(left.mean, right.mean, rtol=1e-8)
    assert close(left.variance, right.variance, rtol=1e-8)
    # merge is symmetric in its arguments; bounds follow stream order
    ab = merge(a, b)
    ba = merge(b, a)
    assert close(ab.mean, ba.mean) and ab.t_start == ba.t_start == 0


def test_covariance_diagonal_matches_variance():
    rng = np.random.default_rng(3)
    raw = rng.normal(size=(100, 3))
    opts = StatisticSet(covariance=True)
    m = merge(summarize(raw[:37], opts=opts), summarize(raw[37:], t_start=37, opts=opts))
    assert close(np.diag(m.covariance), m.variance)


def test_channel_mismatch():
    with pytest.raises(ChannelMismatch):
        merge(summarize(np.zeros((3, 1))), summarize(np.zeros((3, 2)), t_start=3))


def test_histogram_mismatch():
    o1 = StatisticSet(histogram_edges=(0.0, 1.0, 2.0))
    o2 = StatisticSet(histogram_edges=(0.0, 2.0, 4.0))
    a = summarize([0.5, 1.5], opts=o1)
    b = summarize([0.5, 1.5], t_start=2, opts=o2)
    with pytest.raises(DictionaryMismatch):
        merge(a, b)


def test_histogram_counts_sum_to_n():
    opts = StatisticSet(histogram_edges=(0.0, 1.0, 2.0))
    s = summarize([0.5, 1.5, 5.0, -3.0], opts=opts)  # two in range, two outliers
    assert sum(s.histogram.values()) == s.n
    assert s.histogram[stats.OUTLIER_BIN] == 2


def test_intersection_semantics_notes_drop():
    a = summarize(np.random.default_rng(0).normal(size=10), 0, opts=StatisticSet(covariance=True))
    b = summarize(np.random.default_rng(1).normal(size=10), 10)  # no covariance
    m = merge(a, b)
    assert m.covariance is None
    assert any("covariance" in note for note in m.notes)


# -- hulls -------------------------------------------------------------------

SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def test_hull_idempotent_on_square():
    h = merge_hull(SQUARE, SQUARE)
    assert h.shape == (4, 2)
    assert {tuple(p) for p in h} == {tuple(p) for p in SQUARE}


def test_hull_two_triangles_matches_brute_force():
    t1 = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 1.0]])
    t2 = np.array([[3.0, 0.0], [4.0, 0.0], [3.5, 1.0]])
    h = merge_hull(t1, t2)
    brute = stats.convex_hull(np.vstack([t1, t2]))
    assert {tuple(p) for p in h} == {tuple(p) for p in brute}


def test_hull_degenerate_points():
    h = merge_hull(np.array([[0.0, 0.0]]), np.array([[1.0, 1.0]]))
    assert h.shape == (2, 2)


def test_hull_contains_all_inputs():
    rng = np.random.default_rng(5)
    for _ in range(20):
        pts1 = rng.normal(size=(12, 2))
        pts2 = rng.normal(size=(12, 2)) + 0.5
        h = merge_hull(stats.convex_hull(pts1), stats.convex_hull(pts2))
        for p in np.vstack([pts1, pts2]):
            assert stats.hull_contains(h, p, margin=1e-9)


def test_sample_hull_contains_mean():
    rng = np.random.default_rng(9)
    raw = rng.normal(size=(50, 2))
    s = summarize(raw, opts=StatisticSet(hull=True))
    assert stats.hull_contains(s.hull, s.mean, margin=1e-9)


# -- weights -----------------------------------------------------------------

def test_weight_one_is_identity():
    s = summarize([1.0, 2.0])
    assert apply_weight(s, 1.0) == s


def test_negative_weight_rejected():
    with pytest.raises(NegativeWeight):
        apply_weight(summarize([1.0]), -0.5)


def test_zero_weight_excludes():
    a = summarize([0.0, 0.0], 0)
    b = apply_weight(summarize([4.0, 4.0], 2), 0.0)
    m = merge(a, b)
    assert close(m.mean, [0.0])
    assert m.n == 4  # presence is still documented
    assert close(m.max_v, [0.0])  # excluded data do not pollute extrema
    assert any("zero weight" in note for note in m.notes)


def test_half_weight_merge_example():
    a = summarize([0.0, 0.0], 0)
    b = apply_weight(summarize([4.0, 4.0], 2), 0.5)
    m = merge(a, b)
    assert close(m.mean, [4.0 * 1.0 / 3.0])


def test_weighted_effective_count_is_conserved():
    rng = np.random.default_rng(21)
    parts = []
    t = 0
    for w in (1.0, 0.5, 2.0):
        s = apply_weight(summarize(rng.normal(size=5), t), w)
        parts.append(s)
        t += 5
    m = merge_all(parts)
    assert np.isclose(m.effective, sum(p.effective for p in parts))


def test_no_median_field():
    assert not hasattr(summarize([1.0, 2.0]), "median")
