import math

import numpy as np
import pytest

from ldml import (ADVERSARY, AttackSpec, ConfigError, CorruptionSpec,
                  DataError, MixtureSpec, apply_attack,
                  corrupt_for_mean_estimation, random_separated_means,
                  read_dataset, rng_stream, sample_mixture, write_dataset)


def _pairwise_min(means):
    d = np.linalg.norm(means[:, None, :] - means[None, :, :], axis=2)
    iu = np.triu_indices(len(means), 1)
    return d[iu].min()


# ---------------------------------------------------------------------------
# random_separated_means
# ---------------------------------------------------------------------------

def test_separated_means_single():
    m = random_separated_means(1, 5, 3.0, rng_stream(0, "m"))
    assert m.shape == (1, 5)


def test_separated_means_paper_scale():
    m = random_separated_means(7, 100, 40.0, rng_stream(0, "m"))
    assert _pairwise_min(m) >= 40.0


def test_separated_means_low_dim():
    m = random_separated_means(3, 2, 10.0, rng_stream(1, "m"))
    assert _pairwise_min(m) >= 10.0


def test_separated_means_errors():
    with pytest.raises(ConfigError):
        random_separated_means(2, 2, 0.0, rng_stream(0, "m"))

    class _Stuck:
        def uniform(self, lo, hi, size=None):
            return np.zeros(size)

    with pytest.raises(DataError):
        random_separated_means(2, 2, 1.0, _Stuck(), max_tries=3)


# ---------------------------------------------------------------------------
# MixtureSpec / sample_mixture
# ---------------------------------------------------------------------------

def test_mixture_spec_renormalizes():
    spec = MixtureSpec(means=np.zeros((2, 3)), weights=[0.4, 0.4], eps=0.2)
    assert abs(spec.weights.sum() + spec.eps - 1.0) < 1e-12
    with pytest.raises(ConfigError):
        MixtureSpec(means=np.zeros((2, 3)), weights=[0.4], eps=0.2)
    with pytest.raises(ConfigError):
        MixtureSpec(means=np.zeros((1, 3)), weights=[0.5], eps=0.5,
                    component_kind="student_t", df=2.0)


def test_min_separation():
    spec = MixtureSpec(means=np.array([[0.0, 0.0], [3.0, 4.0]]),
                       weights=[0.5, 0.5], eps=0.0)
    assert abs(spec.min_separation() - 5.0) < 1e-12


def test_sample_mixture_clean_mean():
    d = 5
    spec = MixtureSpec(means=np.zeros((1, d)), weights=[1.0], eps=0.0)
    ds = sample_mixture(spec, 100_000, rng_stream(0, "mix"))
    assert np.linalg.norm(ds.points.mean(axis=0)) <= 0.02 * math.sqrt(d)
    assert np.all(ds.labels == 0)


def test_sample_mixture_label_counts():
    spec = MixtureSpec(means=np.array([[0.0], [100.0]]), weights=[0.5, 0.5], eps=0.0)
    n = 10_000
    ds = sample_mixture(spec, n, rng_stream(0, "mix2"))
    c0 = int((ds.labels == 0).sum())
    assert abs(c0 - 5000) <= 4 * math.sqrt(n * 0.25)


def test_student_t_rescaled_to_unit_variance():
    spec = MixtureSpec(means=np.zeros((1, 5)), weights=[1.0], eps=0.0,
                       component_kind="student_t", df=5.0)
    ds = sample_mixture(spec, 20_000, rng_stream(0, "t"))
    var = ds.points.var()        # pooled over 1e5 coordinate draws
    assert abs(var - 1.0) < 0.05


def test_gaussian_directional_concentration():
    # all but a 2*alpha fraction of a unit cluster lies within 10*psi(t,alpha)
    # of the mean along any direction
    from ldml import psi
    d, n, t = 10, 10_000, 4
    spec = MixtureSpec(means=np.zeros((1, d)), weights=[1.0], eps=0.0)
    ds = sample_mixture(spec, n, rng_stream(0, "conc"))
    rng = rng_stream(1, "conc-dirs")
    for alpha in (0.1, 0.01):
        radius = 10.0 * psi(t, alpha)
        for _ in range(100):
            v = rng.standard_normal(d)
            v /= np.linalg.norm(v)
            frac = np.mean(np.abs(ds.points @ v) > radius)
            assert frac <= 2.0 * alpha


# ---------------------------------------------------------------------------
# apply_attack
# ---------------------------------------------------------------------------

def _small_mixture(k=3, d=8, eps=0.2, seed=0):
    means = random_separated_means(k, d, 50.0, rng_stream(seed, "am"))
    return MixtureSpec(means=means, weights=[0.4, 0.25, 0.15], eps=eps)


def test_attack_none_identity():
    spec = _small_mixture()
    ds = sample_mixture(spec, 500, rng_stream(0, "a"))
    out = apply_attack(ds, spec, AttackSpec(kind="none"), spec.eps, rng_stream(0, "b"))
    assert out is ds


def test_attack_budget_exact():
    # adversary points are exactly a ceil(eps * n_total) share of the output
    spec = _small_mixture()
    for eps, n_in in [(0.12, 880), (0.2, 777), (0.555, 445), (0.01, 1000)]:
        ds = sample_mixture(spec, n_in, rng_stream(0, "c"))
        out = apply_attack(ds, spec, AttackSpec(kind="gaussian_adversary"),
                           eps, rng_stream(0, "d"))
        n_adv = int((out.labels == ADVERSARY).sum())
        assert n_adv == math.ceil(eps * out.n)
        assert out.n == n_in + n_adv


@pytest.mark.parametrize("kind", ["adversarial_clusters", "adversarial_line",
                                  "gaussian_adversary", "uniform_plus_cluster"])
def test_attack_append_only(kind):
    spec = _small_mixture()
    ds = sample_mixture(spec, 600, rng_stream(0, "e"))
    out = apply_attack(ds, spec, AttackSpec(kind=kind), spec.eps, rng_stream(0, "f"))
    assert np.array_equal(out.points[:ds.n], ds.points)
    assert np.array_equal(out.labels[:ds.n], ds.labels)
    assert np.all(out.labels[ds.n:] == ADVERSARY)


def test_adversarial_clusters_geometry():
    spec = _small_mixture(d=20)
    ds = sample_mixture(spec, 2000, rng_stream(0, "g"))
    att = AttackSpec(kind="adversarial_clusters", offset_norm=10.0, n_fake=3)
    out = apply_attack(ds, spec, att, spec.eps, rng_stream(0, "h"))
    target = int(np.argmin(spec.weights))
    adv = out.points[out.labels == ADVERSARY]
    dists = np.linalg.norm(adv - spec.means[target], axis=1)
    # offsets are v_c + v_j with norms 10 each, plus unit component noise
    assert dists.max() <= 2 * att.offset_norm + 5 * math.sqrt(out.dim)


def test_adversarial_line_collinear():
    d = 100
    means = random_separated_means(2, d, 60.0, rng_stream(0, "lm"))
    spec = MixtureSpec(means=means, weights=[0.6, 0.28], eps=0.12)
    ds = sample_mixture(spec, 22_000, rng_stream(0, "l"))
    att = AttackSpec(kind="adversarial_line", offset_norm=10.0, n_fake=3)
    out = apply_attack(ds, spec, att, spec.eps, rng_stream(0, "l2"))
    target = int(np.argmin(spec.weights))
    adv = out.points[out.labels == ADVERSARY]
    n_adv = len(adv)
    base = n_adv // 3
    group_sizes = [base, base, n_adv - 2 * base]   # remainder goes last
    offsets = []
    pos = 0
    for c in group_sizes:
        offsets.append(adv[pos:pos + c].mean(axis=0) - spec.means[target])
        pos += c
    offsets = np.array(offsets)
    # group means sit on a common line through the target mean
    _, _, vt = np.linalg.svd(offsets)
    u = vt[0]
    resid = offsets - np.outer(offsets @ u, u)
    assert np.linalg.norm(resid, axis=1).max() <= 0.5
    # spacing along the line is ~offset_norm apart
    proj = np.sort(np.abs(offsets @ u))
    assert np.all(np.abs(np.diff(proj) - att.offset_norm) < 1.5)


def test_attack_target_and_validation():
    spec = _small_mixture()
    ds = sample_mixture(spec, 300, rng_stream(0, "t1"))
    with pytest.raises(ConfigError):
        AttackSpec(kind="bogus")
    with pytest.raises(ConfigError):
        AttackSpec(kind="none", offset_norm=0.0)
    with pytest.raises(ConfigError):
        apply_attack(ds, spec, AttackSpec(kind="adversarial_clusters", target=9),
                     spec.eps, rng_stream(0, "t2"))
    with pytest.raises(ConfigError):
        apply_attack(ds, spec, AttackSpec(kind="adversarial_clusters"),
                     1.5, rng_stream(0, "t4"))
    with pytest.raises(DataError):
        apply_attack(DataSetNoLabels(ds), spec, AttackSpec(kind="adversarial_clusters"),
                     0.2, rng_stream(0, "t5"))


def DataSetNoLabels(ds):
    from ldml import DataSet
    return DataSet(ds.points)


# ---------------------------------------------------------------------------
# corrupt_for_mean_estimation
# ---------------------------------------------------------------------------

def _gauss_base(mu):
    mu = np.asarray(mu, float)
    return lambda m, rng: mu + rng.standard_normal((m, len(mu)))


def test_corruption_no_removal():
    spec = CorruptionSpec(alpha=0.3, w_low=0.1, n=100,
                          adversary=np.array([[50.0]]))
    ds = corrupt_for_mean_estimation(spec, _gauss_base([0.0]), rng_stream(0, "c1"))
    assert ds.n == 100
    assert int((ds.labels == 0).sum()) == 30      # floor(0.01*30) = 0 removed


def test_corruption_counts():
    spec = CorruptionSpec(alpha=0.5, w_low=0.2, n=1000,
                          adversary=np.array([[50.0, 0.0]]))
    ds = corrupt_for_mean_estimation(spec, _gauss_base([0.0, 0.0]), rng_stream(0, "c2"))
    assert int((ds.labels == 0).sum()) == 480     # 500 - floor(0.04*500)
    assert int((ds.labels == ADVERSARY).sum()) == 520


def test_corruption_worst_along_direction():
    # with a deterministic base, the removed points are exactly the largest
    # projections onto the given direction
    def base(m, rng):
        return np.arange(m, dtype=float).reshape(m, 1)

    spec = CorruptionSpec(alpha=0.5, w_low=0.2, n=1000,
                          adversary=np.array([[1e6]]),
                          removal_rule="worst_along_direction",
                          direction=np.array([1.0]))
    ds = corrupt_for_mean_estimation(spec, base, rng_stream(0, "c3"))
    inliers = ds.points[ds.labels == 0].ravel()
    assert inliers.max() == 479.0 and len(inliers) == 480


def test_corruption_validation():
    with pytest.raises(ConfigError):
        CorruptionSpec(alpha=0.0, w_low=0.1, n=10, adversary=np.zeros((1, 1)))
    with pytest.raises(ConfigError):
        CorruptionSpec(alpha=0.001, w_low=0.1, n=10, adversary=np.zeros((1, 1)))
    with pytest.raises(ConfigError):
        CorruptionSpec(alpha=0.5, w_low=0.1, n=10, adversary=np.zeros((1, 1)),
                       removal_rule="worst_along_direction")


# ---------------------------------------------------------------------------
# ldml-v1 file format
# ---------------------------------------------------------------------------

def test_dataset_roundtrip_bit_exact(tmp_path):
    rng = rng_stream(0, "io")
    pts = rng.standard_normal((37, 4)) * np.pi
    labels = rng.integers(-1, 3, size=37)
    for ds in (DataSetFactory(pts), DataSetFactory(pts, labels)):
        path = tmp_path / "x.ldml"
        write_dataset(ds, path)
        back = read_dataset(path)
        assert np.array_equal(back.points, ds.points)
        if ds.labels is None:
            assert back.labels is None
        else:
            assert np.array_equal(back.labels, ds.labels)


def DataSetFactory(pts, labels=None):
    from ldml import DataSet
    return DataSet(pts, labels)


def test_dataset_read_errors(tmp_path):
    p = tmp_path / "bad.ldml"
    p.write_text("not-a-header 1 2 0\n0 0\n")
    with pytest.raises(DataError):
        read_dataset(p)
    p.write_text("ldml-v1 1 2 0\n0.0\n")
    with pytest.raises(DataError):
        read_dataset(p)
