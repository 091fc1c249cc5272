import numpy as np

from sulfsim.streams import ParticleStreams, draw_thresholds


def test_same_seed_identical_draws():
    a = ParticleStreams(7, 100)
    b = ParticleStreams(7, 100)
    assert np.array_equal(a.initial_uniforms(), b.initial_uniforms())
    for _ in range(3):
        assert np.array_equal(a.normals(), b.normals())


def test_streams_are_prefix_stable_in_ensemble_size():
    small = ParticleStreams(3, 50)
    big = ParticleStreams(3, 200)
    assert np.array_equal(small.initial_uniforms(), big.initial_uniforms()[:50])
    assert np.array_equal(small.normals(), big.normals()[:50])


def test_permuted_indices_permute_draws():
    perm = np.array([3, 0, 2, 1])
    base = ParticleStreams(11, 4)
    shuffled = ParticleStreams(11, 4, indices=perm)
    u = base.initial_uniforms()
    assert np.array_equal(shuffled.initial_uniforms(), u[perm])
    z = base.normals()
    assert np.array_equal(shuffled.normals(), z[perm])


def test_threshold_domain_is_disjoint_from_main():
    # drawing thresholds must not perturb the main streams
    a = ParticleStreams(7, 64)
    _ = a.initial_uniforms()
    before = a.normals()
    b = ParticleStreams(7, 64)
    _ = b.initial_uniforms()
    _ = draw_thresholds(7, b.indices)
    after = b.normals()
    assert np.array_equal(before, after)


def test_thresholds_are_unit_exponential(rng):
    n = 100_000
    z = draw_thresholds(123, np.arange(n))
    assert abs(z.mean() - 1.0) <= 3.0 / np.sqrt(n)
    # Var(S^2) for Exp(1) is (mu4 - sigma^4)/n = 8/n
    assert abs(z.var() - 1.0) <= 3.0 * np.sqrt(8.0 / n)
    assert np.all(z > 0)


def test_thresholds_deterministic():
    assert np.array_equal(draw_thresholds(9, np.arange(10)), draw_thresholds(9, np.arange(10)))
