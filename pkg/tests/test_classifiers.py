import time
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import blobs
from gbftsvm import (Dataset, TrainConfig, TwinModel, load_bundled, load_model, predict,
                     predict_batch, save_model, train, train_gbftsvm, train_gbtwsvm, train_twsvm)
from gbftsvm.errors import (DegenerateModel, ModelFormatError, ScoreMisalignment,
                            SingleClassDataset, SingleClassFamily)
from gbftsvm.granular_ball import BallFamily, GranularBall, generate_balls, singleton_family
from gbftsvm.scoring import PythagoreanScore, score_family
from oracles import box_qp_enumerate


def ball(center, radius, label, purity=1.0):
    return GranularBall(np.asarray(center, float), radius, purity, label, np.array([0]), 1)


def unit_scores(fam):
    return [PythagoreanScore(1.0, 0.0, 1.0, 1.0, b.region) for b in fam.balls]


def planes(model):
    """Both planes as unit vectors in (w, b) space."""
    u = np.r_[model.w1, model.b1]
    v = np.r_[model.w2, model.b2]
    return u / np.linalg.norm(u), v / np.linalg.norm(v)


def recover_dense(own, other, alpha, eps):
    E = np.c_[own, np.ones(len(own))]
    F = np.c_[other, np.ones(len(other))]
    return np.linalg.solve(E.T @ E + eps * np.eye(E.shape[1]), F.T @ alpha)


# ------------------------------------------------------------------ TWSVM


def test_two_point_dataset():
    m = train_twsvm(Dataset(np.array([[0.0, 0.0], [2.0, 0.0]]), [1, -1]))
    near = abs(m.w1 @ [0, 0] + m.b1)
    far = abs(m.w1 @ [2, 0] + m.b1)
    assert near < far
    assert predict(m, [0.1, 0.0]) == 1 and predict(m, [1.9, 0.0]) == -1


def test_mirror_symmetric_dataset():
    A = np.array([[0.0, 0.0], [0.2, 1.0], [-0.3, 2.0]])
    y = [1, 1, 1, -1, -1, -1]
    # eps I also regularises the bias, so symmetry about x = 1 holds up to O(reg_eps)
    for axis, cfg in ((1.0, TrainConfig(reg_eps=1e-8, qp_tol=1e-10)), (0.0, TrainConfig())):
        B = A * [-1, 1] + [2 * axis, 0]
        m = train_twsvm(Dataset(np.vstack([A, B]), y), cfg)
        for t in np.linspace(-2, 3, 11):
            d = m.plane_distances([[axis, t]])[0]
            assert d[0] == pytest.approx(d[1], abs=1e-6)


def test_six_points_match_oracle():
    A = np.array([[0.0, 0.0], [0.5, 1.0], [1.0, 0.2]])
    B = np.array([[3.0, 3.0], [3.5, 2.0], [4.0, 3.5]])
    cfg = TrainConfig(C1=1.0, C2=0.5, qp_tol=1e-10)
    m = train_twsvm(Dataset(np.vstack([A, B]), [1] * 3 + [-1] * 3), cfg)
    (qp1, sol1), (qp2, sol2) = m.duals
    a_ref, _ = box_qp_enumerate(qp1.Q, np.ones(3), np.full(3, 1.0))
    g_ref, _ = box_qp_enumerate(qp2.Q, np.ones(3), np.full(3, 0.5))
    np.testing.assert_allclose(sol1.alpha, a_ref, atol=1e-4)
    np.testing.assert_allclose(sol2.alpha, g_ref, atol=1e-4)
    u = -recover_dense(A, B, a_ref, cfg.reg_eps)
    v = recover_dense(B, A, g_ref, cfg.reg_eps)
    np.testing.assert_allclose(np.r_[m.w1, m.b1], u, atol=1e-4)
    np.testing.assert_allclose(np.r_[m.w2, m.b2], v, atol=1e-4)


def test_single_class_training_data():
    with pytest.raises(SingleClassDataset):
        train_twsvm(Dataset(np.zeros((3, 2)), [1, 1, 1]))
    with pytest.raises(SingleClassDataset):
        train("gbtwsvm", Dataset(np.eye(3), [-1, -1, -1]), TrainConfig())
    with pytest.raises(ValueError):
        train("svm", Dataset(np.eye(2), [1, -1]), TrainConfig())


def test_train_config_validation():
    assert TrainConfig(C1=2, C2=3).C3 == 2 and TrainConfig(C1=2, C2=3).C4 == 3
    with pytest.raises(ValueError):
        TrainConfig(C1=0)
    with pytest.raises(ValueError):
        TrainConfig(reg_eps=-1)


# ---------------------------------------------------------------- GBTWSVM


def test_two_ball_example():
    fam = BallFamily((ball([0, 0], 0.1, 1), ball([4, 0], 0.1, -1)))
    m = train_gbtwsvm(fam)
    assert predict(m, [1.0, 0.0]) == 1
    assert predict(m, [3.0, 0.0]) == -1


def test_single_class_family():
    with pytest.raises(SingleClassFamily):
        train_gbtwsvm(BallFamily((ball([0, 0], 0.1, 1),)))


@given(st.integers(0, 10_000))
def test_radius_zero_reduction(seed):
    rng = np.random.default_rng(seed)
    ds = blobs(rng, n=int(rng.integers(4, 30)), d=int(rng.integers(1, 4)), gap=2.0)
    cfg = TrainConfig(qp_tol=1e-9)
    a = train_twsvm(ds, cfg)
    b = train_gbtwsvm(singleton_family(ds), cfg)
    for (qa, _), (qb, _) in zip(a.duals, b.duals):
        np.testing.assert_array_equal(qa.Q, qb.Q)
        np.testing.assert_array_equal(qa.q, qb.q)
        np.testing.assert_array_equal(qa.upper, qb.upper)
    for pa, pb in zip(planes(a), planes(b)):
        np.testing.assert_allclose(pa, pb, atol=1e-6)


def test_larger_radii_do_not_lower_dual_objective(rng):
    pos = rng.normal(size=(4, 2))
    neg = rng.normal(size=(5, 2)) + 3
    r = rng.uniform(0, 0.5, size=5)
    prev = -np.inf
    for grow in (0.0, 0.1, 0.5, 1.0):
        fam = BallFamily(tuple(ball(c, 0.2, 1) for c in pos)
                         + tuple(ball(c, ri + grow, -1) for c, ri in zip(neg, r)))
        sol = train_gbtwsvm(fam, TrainConfig(qp_tol=1e-10)).duals[0][1]
        assert sol.objective_value >= prev - 1e-9
        prev = sol.objective_value


def test_determinism_bitwise(rng):
    ds = blobs(rng, n=80)
    fam = generate_balls(ds)
    scores = score_family(fam)
    a = train_gbftsvm(fam, scores, TrainConfig(C1=2, C2=0.5))
    b = train_gbftsvm(fam, scores, TrainConfig(C1=2, C2=0.5))
    assert a.w1.tobytes() == b.w1.tobytes() and a.b1 == b.b1
    assert a.w2.tobytes() == b.w2.tobytes() and a.b2 == b.b2


def test_dual_feasibility_and_slackness(rng):
    for _ in range(20):
        ds = blobs(rng, n=int(rng.integers(20, 80)), gap=float(rng.uniform(0.5, 3)))
        fam = generate_balls(ds)
        cfg = TrainConfig(C1=float(2.0 ** rng.integers(-3, 4)), C2=float(2.0 ** rng.integers(-3, 4)))
        m = train_gbftsvm(fam, score_family(fam), cfg)
        for qp, sol in m.duals:
            assert np.all(sol.alpha >= 0) and np.all(sol.alpha <= qp.upper)
            assert qp.kkt_residual(sol.alpha) <= 10 * cfg.qp_tol


# ---------------------------------------------------------------- GBFTSVM


@given(st.integers(0, 10_000))
def test_score_one_reduction(seed):
    rng = np.random.default_rng(seed)
    ds = blobs(rng, n=int(rng.integers(10, 60)), gap=1.5)
    fam = generate_balls(ds)
    if len(set(fam.labels.tolist())) < 2:
        return
    cfg = TrainConfig(C1=1.5, C2=0.75)
    a = train_gbtwsvm(fam, cfg)
    b = train_gbftsvm(fam, unit_scores(fam), cfg)
    for (qa, sa), (qb, sb) in zip(a.duals, b.duals):
        np.testing.assert_array_equal(qa.Q, qb.Q)
        np.testing.assert_array_equal(qa.q, qb.q)
        np.testing.assert_array_equal(qa.upper, qb.upper)
        np.testing.assert_allclose(sa.alpha, sb.alpha, atol=1e-8)


def test_zero_score_ball_is_inert_in_its_dual():
    pos = [ball([0, 0], 0.2, 1), ball([0.5, 1], 0.1, 1)]
    neg = [ball([3, 3], 0.2, -1), ball([4, 2], 0.3, -1), ball([1.5, 1.2], 0.1, -1)]
    fam = BallFamily(tuple(pos + neg))
    scores = unit_scores(fam)
    scores[-1] = PythagoreanScore(0.0, 0.0, 0.0, 0.0, scores[-1].region)
    cfg = TrainConfig(C1=4.0, C2=4.0, qp_tol=1e-10)
    m = train_gbftsvm(fam, scores, cfg)
    assert m.duals[0][1].alpha[-1] == 0.0
    smaller = BallFamily(tuple(pos + neg[:-1]))
    m2 = train_gbftsvm(smaller, unit_scores(smaller), cfg)
    # the negative ball still shapes plane 2 as an own-class row; plane 1 must not move
    np.testing.assert_allclose(np.r_[m.w1, m.b1], np.r_[m2.w1, m2.b1], atol=1e-6)


def test_mixed_scores_match_oracle():
    fam = BallFamily((ball([0, 0], 0.1, 1), ball([3, 1], 0.2, -1), ball([2.5, -1], 0.3, -1),
                      ball([1, 0.5], 0.1, 1, purity=0.75)))
    scores = score_family(fam)
    cfg = TrainConfig(C1=2.0, C2=3.0, qp_tol=1e-10)
    m = train_gbftsvm(fam, scores, cfg)
    s = np.array([sc.score for sc in scores])
    for (qp, sol), upper, r in zip(m.duals, (2.0 * s[[1, 2]], 3.0 * s[[0, 3]]),
                                   ([0.2, 0.3], [0.1, 0.1])):
        np.testing.assert_array_equal(qp.upper, upper)
        np.testing.assert_array_equal(qp.q, 1 + np.array(r))
        ref, _ = box_qp_enumerate(qp.Q, qp.q, upper)
        np.testing.assert_allclose(sol.alpha, ref, atol=1e-4)


def test_score_misalignment():
    fam = BallFamily((ball([0, 0], 0.1, 1), ball([3, 1], 0.2, -1)))
    with pytest.raises(ScoreMisalignment):
        train_gbftsvm(fam, unit_scores(fam)[:1])
    impure = BallFamily((ball([0, 0], 0.1, 1, purity=0.8), ball([3, 1], 0.2, -1)))
    with pytest.raises(ScoreMisalignment):
        train_gbftsvm(impure, unit_scores(fam))


# ---------------------------------------------------------------- predict


def test_predict_examples():
    m = TwinModel(np.array([1.0, 0.0]), 0.0, np.array([1.0, 0.0]), -2.0)
    assert predict(m, [0.1, 0.0]) == 1
    assert predict(m, [1.9, 0.0]) == -1
    assert predict(m, [1.0, 5.0]) == 1  # equidistant


def test_predict_batch_matches_rowwise(rng):
    m = TwinModel(rng.normal(size=3), 0.3, rng.normal(size=3), -0.1)
    X = rng.normal(size=(50, 3))
    assert predict_batch(m, X).tolist() == [predict(m, x) for x in X]
    assert predict_batch(m, np.zeros((0, 3))).shape == (0,)
    with pytest.raises(ValueError):
        predict_batch(m, np.zeros((2, 4)))


def test_zero_normal_is_degenerate():
    m = TwinModel(np.zeros(2), 1.0, np.array([1.0, 0.0]), 0.0)
    with pytest.raises(DegenerateModel):
        predict(m, [0.0, 0.0])


@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_prediction_scale_invariance(seed, s1, s2):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 5))
    m = TwinModel(rng.normal(size=d), float(rng.normal()), rng.normal(size=d), float(rng.normal()))
    scaled = replace(m, w1=s1 * m.w1, b1=s1 * m.b1, w2=s2 * m.w2, b2=s2 * m.b2)
    X = rng.uniform(-3, 3, size=(40, d))
    D, Ds = m.plane_distances(X), scaled.plane_distances(X)
    clear = np.abs(D[:, 0] - D[:, 1]) > 1e-9  # exact ties may flip under rounding
    assert (predict_batch(m, X)[clear] == predict_batch(scaled, X)[clear]).all()
    np.testing.assert_allclose(Ds, D, rtol=1e-9, atol=1e-12)


def test_batch_prediction_speed():
    ds = load_bundled("fourclass_synth")
    m = train_twsvm(ds)
    predict_batch(m, ds.features)
    t0 = time.perf_counter()
    predict_batch(m, ds.features)
    assert time.perf_counter() - t0 < 0.01


# ------------------------------------------------------------ persistence


def test_model_round_trip_bitwise(tmp_path, rng):
    ds = blobs(rng, n=60, d=3)
    m = train("gbftsvm", ds, TrainConfig(C1=0.3, C2=7.0)).with_scale([1, 2, 3], [0.5, 1, 2])
    p = tmp_path / "m.txt"
    save_model(m, p)
    back = load_model(p)
    assert back.trained_by == "gbftsvm" and back.config == m.config
    for f in ("w1", "w2"):
        assert getattr(back, f).tobytes() == getattr(m, f).tobytes()
    assert back.b1 == m.b1 and back.b2 == m.b2
    for a, b in zip(back.scale, m.scale):
        np.testing.assert_array_equal(a, b)
    X = rng.normal(size=(20, 3))
    np.testing.assert_array_equal(predict_batch(back, X), predict_batch(m, X))


@pytest.mark.parametrize("text", [
    "",
    "w1=1\n",
    "# gbtsvm-model v9\ndim=1\nw1=1\nb1=0\nw2=1\nb2=0\n",
    "# gbtsvm-model v1\ndim=2\nw1=1\nb1=0\nw2=1\nb2=0\n",
    "# gbtsvm-model v1\ndim=1\nw1=x\nb1=0\nw2=1\nb2=0\n",
    "# gbtsvm-model v1\ndim=1\nw1=1\nb1=0\nw2=1\n",
    "# gbtsvm-model v1\ndim=1\nw1=1\nb1=0\nw2=1\nb2=0\nno separator\n",
    "# gbtsvm-model v1\ndim=1\nw1=1\nb1=0\nw2=1\nb2=0\nconfig.C1=-1\n",
    "# gbtsvm-model v1\ndim=1\nw1=1\nb1=0\nw2=1\nb2=0\nscale_lo=0\n",
])
def test_malformed_model_files(tmp_path, text):
    p = tmp_path / "bad.txt"
    p.write_text(text)
    with pytest.raises(ModelFormatError):
        load_model(p)
