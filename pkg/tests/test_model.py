import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from helpers import make_schema, random_model
from offset_rec.errors import (CorruptSnapshot, InvalidCounts, InvalidDimensions, UnknownFeatureValue,
                               UnknownVariant)
from offset_rec.layout import build_layout
from offset_rec.model import (Model, UserProfile, compose_user_vector, load_snapshot, random_profile,
                              rank_variants, save_snapshot, score, score_all, score_bound)
from offset_rec.trainer import TrainerConfig, TrainerState


def _vectors(model, profile):
    return [model.feature_vector(k, i) for k, i in enumerate(profile.values)]


def test_all_ones_compose_to_ones(rng):
    m = random_model(rng)
    m.values[:] = 1.0
    u = compose_user_vector(UserProfile((0, 1, 1)), m)
    assert np.array_equal(u, np.ones(m.layout.D))
    assert score(UserProfile((0, 1, 1)), 2, m) == pytest.approx(m.variants[2].sum(), rel=1e-12)


def test_two_features_products(rng):
    m = random_model(rng, sizes=(2, 3), s=2, o=3)
    p = UserProfile((1, 2))
    u = compose_user_vector(p, m)
    v0, v1 = _vectors(m, p)
    lay = m.layout
    for t, i in enumerate(lay.feature_slots[0][:lay.s]):
        assert u[i] == v0[t]
    for t, i in enumerate(lay.feature_slots[1][:lay.s]):
        assert u[i] == v1[t]
    for t in range(lay.s, lay.d):
        i = lay.feature_slots[0][t]
        t1 = int(np.flatnonzero(lay.feature_slots[1] == i)[0])
        assert u[i] == v0[t] * v1[t1]


def test_compose_matches_bruteforce_k3(rng):
    m = random_model(rng)
    for _ in range(20):
        p = random_profile(m.schema, rng)
        expected = oracles.compose(_vectors(m, p), m.layout)
        assert np.allclose(compose_user_vector(p, m), expected, rtol=0, atol=1e-12)


@given(st.integers(1, 5), st.integers(0, 3), st.integers(0, 3), st.integers(0, 2**32 - 1))
def test_compose_property(K, s, o, seed):
    if s + o < 1 or (K == 1 and s == 0):
        return
    rng = np.random.default_rng(seed)
    sizes = tuple(int(x) for x in rng.integers(1, 4, size=K))
    m = random_model(rng, sizes=sizes, s=s, o=o, seed=seed)
    p = random_profile(m.schema, rng)
    u = compose_user_vector(p, m)
    assert np.max(np.abs(u - oracles.compose(_vectors(m, p), m.layout))) <= 1e-12
    s_all = score_all(p, m)
    for a in range(m.n_variants):
        assert s_all[a] == pytest.approx(oracles.score(_vectors(m, p), m.variants[a], m.layout), abs=1e-12)


def test_zero_variant_scores_zero(rng):
    m = random_model(rng)
    m.variants[3] = 0.0
    for _ in range(10):
        assert score(random_profile(m.schema, rng), 3, m) == 0.0


def test_score_errors(rng):
    m = random_model(rng)
    with pytest.raises(UnknownVariant):
        score(UserProfile((0, 0, 0)), 5, m)
    with pytest.raises(UnknownFeatureValue):
        score(UserProfile((0, 9, 0)), 0, m)
    with pytest.raises(UnknownFeatureValue):
        score(UserProfile((0, 0)), 0, m)


def test_schema_profile_labels():
    schema = make_schema((2, 3))
    assert schema.profile(f0="v1", f1="v2").values == (1, 2)
    with pytest.raises(UnknownFeatureValue):
        schema.profile(f0="v9", f1="v0")
    with pytest.raises(UnknownFeatureValue):
        schema.profile(f0="v0")


def test_rank_ties_by_id(rng):
    m = random_model(rng, n_variants=4)
    m.variants[:] = 0.0
    assert rank_variants(UserProfile((0, 0, 0)), m) == [0, 1, 2, 3]
    m.variants[2] = 1.0
    m.values[:] = 1.0
    assert rank_variants(UserProfile((0, 0, 0)), m) == [2, 0, 1, 3]


def test_score_bound_examples():
    assert score_bound(100, 100) == 0.0
    assert score_bound(round(math.e**2 * 1e6), 1_000_000) == pytest.approx(1.0, abs=1e-6)
    # 0.5 * ln(297.34); quoted elsewhere as about 2.848
    assert score_bound(8_000_000, 26_905) == pytest.approx(2.84744, abs=1e-5)
    for bad in [(10, 0), (10, 11), (0, 0)]:
        with pytest.raises(InvalidCounts):
            score_bound(*bad)


def test_model_shape_validation():
    schema = make_schema((2, 2))
    lay = build_layout(2, 1, 1)
    with pytest.raises(InvalidDimensions):
        Model(schema, lay, np.zeros((3, lay.d)), np.zeros((2, lay.D)))
    with pytest.raises(InvalidDimensions):
        Model(schema, lay, np.zeros((4, lay.d)), np.zeros((2, lay.D + 1)))
    with pytest.raises(InvalidDimensions):
        Model(make_schema((2,)), lay, np.zeros((2, lay.d)), np.zeros((2, lay.D)))


def test_initialize_range_and_determinism():
    schema = make_schema((4, 5, 3))
    a = Model.initialize(schema, 5, seed=3)
    b = Model.initialize(schema, 5, seed=3)
    assert a == b
    assert a.values.min() >= 0.4 and a.values.max() <= 0.6
    assert a.variants.min() >= 0.4 and a.variants.max() <= 0.6
    assert Model.initialize(schema, 5, seed=4) != a


def test_copy_is_deep(rng):
    m = random_model(rng)
    c = m.copy()
    c.values[0, 0] += 1.0
    assert c != m


def test_snapshot_roundtrip_bit_exact(rng, tmp_path):
    m = random_model(rng)
    st_ = TrainerState(mu=-0.0123456789, window_clicks=3, window_nonclicks=40, total_clicks=17,
                       total_impressions=1043, exp_mean=0.5, window_exp_sum=1.25)
    cfg = TrainerConfig(alpha=0.07, rescale_mode="linf_clip")
    path = tmp_path / "m.npz"
    save_snapshot(path, m, st_, cfg)
    m2, st2, cfg2 = load_snapshot(path)
    assert m2 == m and st2 == st_ and cfg2 == cfg
    assert m2.values.tobytes() == m.values.tobytes()


def test_snapshot_truncated(rng, tmp_path):
    path = tmp_path / "m.npz"
    save_snapshot(path, random_model(rng))
    data = path.read_bytes()
    path.write_bytes(data[: len(data) // 2])
    with pytest.raises(CorruptSnapshot):
        load_snapshot(path)


def test_snapshot_not_a_snapshot(tmp_path):
    path = tmp_path / "x.npz"
    np.savez(path, meta=np.frombuffer(b'{"format": "other"}', dtype=np.uint8), feature_slots=np.zeros(1),
             values=np.zeros(1), variants=np.zeros(1), mu=np.zeros(1))
    with pytest.raises(CorruptSnapshot):
        load_snapshot(path)
    path.write_text("plain text")
    with pytest.raises(CorruptSnapshot):
        load_snapshot(path)


def test_snapshot_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_snapshot(tmp_path / "absent.npz")
