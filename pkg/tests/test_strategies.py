import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dystrat import data as D
from dystrat.errors import InvalidInputError, InvalidParameterError, InvalidSpecError
from dystrat.mlp import MlpConfig
from dystrat.strategies import (
    Kind,
    StrategySet,
    StrategySpec,
    TrainedStrategy,
    enumerate_strategies,
    forecast,
    proper_divisors,
    rectify_parts,
    spec_from_name,
    train_all,
    train_strategy,
)

FAST = MlpConfig(hidden_width=8, max_epochs=15)


class Stub:
    """Deterministic map of each input row; stands in for a regressor."""

    def __init__(self, fn):
        self.fn = fn

    def predict(self, X):
        X = np.asarray(X, dtype=np.float64)
        return np.array([self.fn(row) for row in X])


def recmo_reference(g, x, sigma, w, H):
    buf = list(x)
    out = []
    while len(out) < H:
        step = list(g(np.array(buf[len(buf) - w:])))[:sigma]
        out.extend(step)
        buf.extend(step)
    return np.array(out[:H])


@pytest.fixture(scope="module")
def sine_train():
    ts = D.normalize(D.generate_noisy_sine(400, seed=0))
    return D.make_windows(ts, 8, 4)


class TestEnumeration:
    def test_h10_order(self):
        names = [s.display_name for s in enumerate_strategies(10)]
        assert names == ["mo", "rectify", "d1", "r1", "dirrec", "d2", "r2", "d5", "r5"]

    @pytest.mark.parametrize("H,count", [(10, 9), (20, 13), (160, 25), (1, 3)])
    def test_counts(self, H, count):
        specs = enumerate_strategies(H)
        assert len(specs) == count
        n_div = sum(1 for d in range(1, H + 1) if H % d == 0)
        assert count == 2 * (n_div - 1) + 3

    def test_h20_has_10(self):
        names = [s.display_name for s in enumerate_strategies(20)]
        assert "d10" in names and "r10" in names

    def test_h1(self):
        assert [s.display_name for s in enumerate_strategies(1)] == ["mo", "rectify", "dirrec"]

    def test_invalid(self):
        with pytest.raises(InvalidParameterError):
            enumerate_strategies(0)

    def test_names_roundtrip(self):
        for spec in enumerate_strategies(20):
            assert spec_from_name(spec.display_name) == spec
        assert proper_divisors(12) == [1, 2, 3, 4, 6]


class TestForecastStubs:
    def test_persistence(self):
        s = TrainedStrategy(StrategySpec(Kind.RECMO, 1), 2, 3, (Stub(lambda x: [x[-1]]),))
        assert forecast(s, [1.0, 2.0]).tolist() == [2.0, 2.0, 2.0]

    def test_dirmo_concat(self):
        models = (Stub(lambda x: [0.1, 0.2]), Stub(lambda x: [0.3, 0.4]))
        s = TrainedStrategy(StrategySpec(Kind.DIRMO, 2), 3, 4, models)
        assert forecast(s, [9.0, 9.0, 9.0]).tolist() == [0.1, 0.2, 0.3, 0.4]

    def test_identity_recursion(self):
        s = TrainedStrategy(StrategySpec(Kind.RECMO, 2), 2, 4, (Stub(lambda x: x),))
        assert forecast(s, [0.7, -1.3]).tolist() == [0.7, -1.3, 0.7, -1.3]

    @pytest.mark.parametrize("w,sigma,H", [(3, 6, 6), (8, 2, 6), (2, 2, 6), (3, 1, 7), (4, 3, 9)])
    def test_rolling_matches_reference(self, w, sigma, H):
        rng = np.random.default_rng(w * 100 + sigma * 10 + H)
        A = rng.normal(size=(w, sigma))

        def g(x):
            return np.tanh(x @ A) + 0.1 * x.sum()

        s = TrainedStrategy(StrategySpec(Kind.RECMO, sigma), w, H, (Stub(g),))
        X = rng.normal(size=(12, w))
        got = s.forecast_batch(X)
        for row, x in zip(got, X):
            assert np.array_equal(row, recmo_reference(g, x, sigma, w, H))

    def test_dirrec_chain(self):
        models = tuple(Stub(lambda x, i=i: [x.sum() + i]) for i in range(3))
        s = TrainedStrategy(StrategySpec(Kind.DIRREC), 2, 3, models)
        x = np.array([1.0, 2.0])
        a = 3.0
        b = 1.0 + 2.0 + a + 1
        c = 1.0 + 2.0 + a + b + 2
        assert forecast(s, x).tolist() == [a, b, c]

    def test_wrong_length(self):
        s = TrainedStrategy(StrategySpec(Kind.MO), 3, 2, (Stub(lambda x: x[:2]),))
        with pytest.raises(InvalidInputError):
            forecast(s, [1.0, 2.0])


class TestTraining:
    def test_sigma_h_collapse(self, sine_train):
        specs = [StrategySpec(Kind.MO), StrategySpec(Kind.RECMO, 4), StrategySpec(Kind.DIRMO, 4)]
        trained = [train_strategy(s, sine_train, FAST) for s in specs]
        X = np.random.default_rng(0).uniform(0, 1, (100, 8))
        outs = [t.forecast_batch(X).tobytes() for t in trained]
        assert outs[0] == outs[1] == outs[2]

    def test_dirmo_model_count(self):
        ts = D.normalize(D.generate_noisy_sine(200, seed=1))
        ds = D.make_windows(ts, 40, 20)
        t = train_strategy(StrategySpec(Kind.DIRMO, 5), ds, FAST.replace(max_epochs=2))
        assert len(t.models) == 4

    def test_dirmo_order_independent(self, sine_train):
        spec = StrategySpec(Kind.DIRMO, 1)
        a = train_strategy(spec, sine_train, FAST)
        b = train_strategy(spec, sine_train, FAST, model_order=[3, 1, 0, 2])
        X = sine_train.inputs[:30]
        assert a.forecast_batch(X).tobytes() == b.forecast_batch(X).tobytes()

    def test_rectify_additive(self, sine_train):
        t = train_strategy(StrategySpec(Kind.RECTIFY), sine_train, FAST)
        X = sine_train.inputs[:50]
        base, corr = rectify_parts(t, X)
        assert np.array_equal(t.forecast_batch(X), base + corr)

    def test_rectify_on_ar1(self):
        rng = np.random.default_rng(5)
        n = 1500
        y = np.empty(n)
        y[0] = 0.5
        for t in range(1, n):
            y[t] = 0.3 + 0.4 * y[t - 1]
        ds = D.make_windows(D.TimeSeries("ar", y + 1e-3 * rng.normal(size=n), "csv"), 4, 4)
        t = train_strategy(StrategySpec(Kind.RECTIFY), ds, MlpConfig(hidden_width=16, seed=2))
        base, corr = rectify_parts(t, ds.inputs)
        base_mse = float(np.mean((ds.targets - base) ** 2))
        resid_mse = float(np.mean((ds.targets - base - corr) ** 2))
        assert resid_mse <= base_mse + 1e-6

    def test_sigma_must_divide(self, sine_train):
        with pytest.raises(InvalidSpecError):
            train_strategy(StrategySpec(Kind.RECMO, 3), sine_train, FAST)
        with pytest.raises(InvalidSpecError):
            StrategySpec(Kind.DIRMO, 0)

    def test_train_all(self, sine_train, tmp_path):
        sset = train_all(enumerate_strategies(4), sine_train, FAST)
        assert sset.names == ["mo", "rectify", "d1", "r1", "dirrec", "d2", "r2"]
        cube = sset.forecast_all(sine_train.inputs[:10])
        assert cube.shape == (7, 10, 4)
        path = tmp_path / "set.npz"
        sset.save(path)
        back = StrategySet.load(path)
        assert back.names == sset.names
        assert back.training_fingerprint == sset.training_fingerprint
        assert back.forecast_all(sine_train.inputs[:10]).tobytes() == cube.tobytes()

    def test_single_and_duplicate(self, sine_train):
        assert len(train_all([StrategySpec(Kind.MO)], sine_train, FAST)) == 1
        with pytest.raises(InvalidSpecError):
            train_all([StrategySpec(Kind.MO), StrategySpec(Kind.MO)], sine_train, FAST)

    def test_seed_isolation(self, sine_train):
        """Adding strategies to the set does not change the others' training."""
        alone = train_all([spec_from_name("d2")], sine_train, FAST)
        full = train_all(enumerate_strategies(4), sine_train, FAST)
        X = sine_train.inputs[:20]
        assert alone[0].forecast_batch(X).tobytes() == full[5].forecast_batch(X).tobytes()


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([1, 2, 3, 4, 6, 12]), st.integers(1, 30), st.data())
def test_horizon_exactness(H, w, data):
    spec = data.draw(st.sampled_from(enumerate_strategies(H)))
    rng = np.random.default_rng(H * 31 + w)

    def make(out_dim, in_dim):
        A = rng.normal(size=(in_dim, out_dim))
        return Stub(lambda x: np.sin(x @ A))

    kind = spec.kind
    if kind is Kind.MO:
        models = (make(H, w),)
    elif kind is Kind.RECMO:
        models = (make(spec.sigma, w),)
    elif kind is Kind.DIRMO:
        models = tuple(make(spec.sigma, w) for _ in range(H // spec.sigma))
    elif kind is Kind.DIRREC:
        models = tuple(make(1, w + i) for i in range(H))
    else:
        models = (make(1, w), make(H, w))
    s = TrainedStrategy(spec, w, H, models)
    X = rng.normal(size=(5, w))
    out = s.forecast_batch(X)
    assert out.shape == (5, H)
    assert np.isfinite(out).all()
    assert np.array_equal(forecast(s, X[2]), out[2])
