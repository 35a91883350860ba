import numpy as np
import pytest

from zne.inference import (
    AdaExpFactory,
    DegenerateFit,
    Exhausted,
    ExpFactory,
    InsufficientData,
    LinearFactory,
    PolyExpFactory,
    PolyFactory,
    RichardsonFactory,
    ScaleMismatch,
    SingularSystem,
    fit_exponential,
    fit_polynomial,
    parse_factory,
    richardson_weights,
)

SCALES = [1.0, 1.5, 2.0, 2.5, 3.0]


def run(factory, f):
    """Drives ``factory`` with values ``f(scale)`` and reduces."""
    while not factory.is_done():
        s = factory.next_scale()
        factory.push(s, f(s))
    return factory.reduce()


def all_factories():
    return [
        LinearFactory(SCALES),
        RichardsonFactory(SCALES),
        RichardsonFactory(SCALES, "ends"),
        PolyFactory(SCALES, 2),
        ExpFactory(SCALES),
        ExpFactory(SCALES, asymptote=0.25),
        PolyExpFactory(SCALES, 2),
        PolyExpFactory(SCALES, 1, asymptote=0.0),
        AdaExpFactory(2.0, 5),
        AdaExpFactory(2.0, 4, asymptote=0.5),
    ]


def factory_id(f):
    return type(f).__name__


class TestSchedule:
    def test_static_order(self):
        f = LinearFactory([1.0, 2.0, 3.0])
        seen = []
        while not f.is_done():
            seen.append(f.next_scale())
            f.push(seen[-1], 0.0)
        assert seen == [1.0, 2.0, 3.0]

    @pytest.mark.parametrize("factory", all_factories(), ids=factory_id)
    def test_not_done_before_push(self, factory):
        assert not factory.is_done()

    def test_next_scale_is_idempotent(self):
        f = LinearFactory([1.0, 2.0])
        assert f.next_scale() == f.next_scale() == 1.0

    def test_push_and_history(self):
        f = LinearFactory([1.0, 2.0, 3.0])
        f.push(f.next_scale(), 0.98)
        assert f.history == ([1.0], [0.98])

    def test_scale_mismatch(self):
        f = LinearFactory([1.0, 2.0])
        f.next_scale()
        with pytest.raises(ScaleMismatch):
            f.push(2.0, 0.5)
        g = LinearFactory([1.0, 2.0])
        with pytest.raises(ScaleMismatch):
            g.push(1.0, 0.5)

    def test_exhausted(self):
        f = LinearFactory([1.0, 2.0, 3.0])
        for s in (1.0, 2.0, 3.0):
            f.push(f.next_scale(), s)
        assert f.is_done()
        with pytest.raises(Exhausted):
            f.next_scale()

    def test_adaexp_schedule(self):
        f = AdaExpFactory(scale_factor=2.0, steps=5)
        scales = []
        while not f.is_done():
            s = f.next_scale()
            scales.append(s)
            f.push(s, 0.2 + 0.8 * np.exp(-0.4 * s))
        assert scales[:2] == [1.0, 2.0]
        assert len(scales) == 5
        assert all(1.0 <= s <= 5.0 for s in scales)
        # the third point is forced to the end of the grid while underdetermined
        assert scales[2] == 5.0

    def test_adaexp_is_deterministic(self):
        def schedule():
            f = AdaExpFactory(2.0, 6)
            run(f, lambda s: 0.1 + 0.9 * np.exp(-0.3 * s))
            return f.get_scale_factors()

        assert schedule() == schedule()

    def test_adaexp_recovers_exponential(self):
        value, _ = run(AdaExpFactory(2.0, 5), lambda s: 0.1 + 0.7 * np.exp(-0.6 * s))
        assert value == pytest.approx(0.8, abs=1e-6)

    def test_fresh_resets(self):
        f = AdaExpFactory(2.0, 5)
        run(f, lambda s: np.exp(-s))
        g = f.fresh()
        assert g.history == ([], [])
        assert g.next_scale() == 1.0
        assert f.is_done()


class TestReduce:
    def test_richardson_example(self):
        # interpolant l^2 - 2l + 3 solved independently from the Vandermonde system
        xs = np.array([1.0, 2.0, 3.0])
        ys = np.array([2.0, 3.0, 6.0])
        coeffs = np.linalg.solve(np.vander(xs, 3, increasing=True), ys)
        assert np.allclose(coeffs, [3, -2, 1])
        data = dict(zip(xs, ys))
        value, diag = run(RichardsonFactory([1.0, 2.0, 3.0]), data.__getitem__)
        assert value == pytest.approx(coeffs[0], abs=1e-12)
        assert diag.extrapolation_only

    def test_linear_through_origin(self):
        value, _ = run(LinearFactory([1.0, 2.0]), lambda s: s)
        assert value == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("factory", all_factories(), ids=factory_id)
    @pytest.mark.parametrize("v", [0.0, 0.731, -2.5])
    def test_constant_data(self, factory, v):
        value, diag = run(factory.fresh(), lambda s: v)
        assert value == pytest.approx(v, abs=1e-9)
        assert diag.residual_norm >= 0

    def test_exp_known_asymptote(self):
        f = ExpFactory([1.0, 2.0, 3.0], asymptote=0.25)
        value, _ = run(f, lambda s: 0.25 + 0.75 * np.exp(-0.5 * s))
        assert value == pytest.approx(1.0, abs=1e-6)

    def test_single_distinct_scale(self):
        with pytest.raises(InsufficientData):
            run(RichardsonFactory([2.0, 2.0]), lambda s: 0.3 * s)

    def test_richardson_duplicates(self):
        with pytest.raises(DegenerateFit):
            run(RichardsonFactory([1.0, 1.0, 2.0]), lambda s: 0.3 * s)

    def test_reduce_before_done(self):
        f = LinearFactory([1.0, 2.0])
        f.push(f.next_scale(), 1.0)
        with pytest.raises(InsufficientData):
            f.reduce()

    def test_too_few_points_for_model(self):
        with pytest.raises(InsufficientData):
            PolyFactory([1.0, 2.0], 2)
        with pytest.raises(InsufficientData):
            run(ExpFactory([1.0, 2.0]), lambda s: np.exp(-s))

    def test_richardson_subset(self):
        f = RichardsonFactory(SCALES, "ends")
        value, _ = run(f, lambda s: 1 - 0.2 * s + 0.03 * s**2 + (0.5 if s in (1.5, 2.5) else 0))
        # middle-skipped points carry the outliers, so the quadratic is exact
        assert value == pytest.approx(1.0, abs=1e-12)


class TestFitters:
    def test_polynomial_recovers_quadratic(self):
        xs = [1.0, 2.0, 3.5, 4.0]
        coeffs = fit_polynomial(xs, [0.3 - 1.1 * x + 0.25 * x**2 for x in xs], 2)
        assert np.allclose(coeffs, [0.3, -1.1, 0.25], atol=1e-9)

    def test_polynomial_matches_normal_equations(self):
        rng = np.random.default_rng(41)
        for _ in range(50):
            xs = np.sort(rng.uniform(1, 5, size=8))
            ys = rng.normal(size=8)
            order = int(rng.integers(0, 4))
            v = np.vander(xs, order + 1, increasing=True)
            oracle = np.linalg.solve(v.T @ v, v.T @ ys)
            assert np.allclose(fit_polynomial(xs, ys, order), oracle, atol=1e-8)

    def test_polynomial_singular(self):
        with pytest.raises(SingularSystem):
            fit_polynomial([1.0, 1.0, 2.0], [0.0, 1.0, 2.0], 2)

    def test_exponential_known_zero_asymptote(self):
        xs = np.array([0.5, 1.0, 1.5, 2.0])
        # oracle: log-linear regression by hand
        slope, intercept = np.polyfit(xs, -xs, 1)
        assert (np.exp(intercept), -slope) == pytest.approx((1.0, 1.0))
        a, b, c = fit_exponential(xs, np.exp(-xs), asymptote=0.0)
        assert (a, b, c) == pytest.approx((0.0, 1.0, 1.0), abs=1e-8)

    def test_exponential_unknown_asymptote(self):
        xs = np.array(SCALES)
        a, b, c = fit_exponential(xs, 0.3 - 0.5 * np.exp(-0.8 * xs))
        assert (a, b, c) == pytest.approx((0.3, -0.5, 0.8), abs=1e-6)

    def test_exponential_sign_change_falls_back(self):
        xs = np.array(SCALES)
        ys = 0.25 + 0.6 * np.exp(-0.7 * xs)
        ys[-1] = 0.2  # below the asymptote
        a, b, c = fit_exponential(xs, ys, asymptote=0.25)
        assert a == 0.25
        assert np.isfinite(b) and np.isfinite(c)

    def test_richardson_weights_sum_to_one(self):
        w = richardson_weights([1.0, 2.0, 3.0])
        assert np.allclose(w, [3, -3, 1])


class TestProperties:
    def test_richardson_exactness(self):
        rng = np.random.default_rng(43)
        for _ in range(200):
            m = int(rng.integers(2, 7))
            coeffs = rng.uniform(-2, 2, size=m)
            xs = np.sort(rng.choice(np.arange(1.0, 5.01, 0.25), size=m, replace=False))
            value, _ = run(RichardsonFactory(xs), lambda s: np.polyval(coeffs[::-1], s))
            assert value == pytest.approx(coeffs[0], abs=1e-8)

    @pytest.mark.parametrize("make", [lambda: LinearFactory(SCALES), lambda: PolyFactory(SCALES, 2), lambda: PolyFactory(SCALES, 3), lambda: RichardsonFactory(SCALES)])
    def test_shift_equivariance(self, make):
        rng = np.random.default_rng(47)
        for _ in range(50):
            ys = dict(zip(SCALES, rng.normal(size=5)))
            k = float(rng.uniform(-3, 3))
            base, _ = run(make(), ys.__getitem__)
            shifted, _ = run(make(), lambda s: ys[s] + k)
            assert shifted == pytest.approx(base + k, abs=1e-9)

    @pytest.mark.parametrize("known", [True, False])
    def test_exp_recovery(self, known):
        rng = np.random.default_rng(53 + known)
        for _ in range(100):
            a = rng.uniform(-1, 1)
            b = rng.uniform(0, 1) or 1.0
            c = rng.uniform(0.1, 2)
            f = ExpFactory(SCALES, asymptote=a if known else None)
            value, _ = run(f, lambda s: a + b * np.exp(-c * s))
            assert value == pytest.approx(a + b, abs=1e-6 if known else 1e-4)

    def test_polyexp_recovery(self):
        value, _ = run(PolyExpFactory(SCALES, 2, asymptote=0.1), lambda s: 0.1 + np.exp(-0.2 - 0.3 * s - 0.05 * s**2))
        assert value == pytest.approx(0.1 + np.exp(-0.2), abs=1e-9)
        value, _ = run(PolyExpFactory(SCALES, 1), lambda s: 0.1 + np.exp(-0.2 - 0.3 * s))
        assert value == pytest.approx(0.1 + np.exp(-0.2), abs=1e-6)

    def test_noise_is_amplified(self):
        rng = np.random.default_rng(59)
        sigma = 0.01
        estimates = []
        for _ in range(500):
            noise = dict(zip([1.0, 2.0, 3.0], rng.normal(0, sigma, size=3)))
            value, _ = run(RichardsonFactory([1.0, 2.0, 3.0]), lambda s: 0.9 - 0.1 * s + noise[s])
            estimates.append(value)
        # weights (3, -3, 1) predict a spread of sqrt(19) sigma
        assert np.std(estimates, ddof=1) > sigma


class TestParse:
    @pytest.mark.parametrize(
        "text, cls",
        [
            ("linear", LinearFactory),
            ("richardson", RichardsonFactory),
            ("richardson:ends", RichardsonFactory),
            ("poly:2", PolyFactory),
            ("exp", ExpFactory),
            ("exp:0.25", ExpFactory),
            ("polyexp:1", PolyExpFactory),
            ("polyexp:2:0.5", PolyExpFactory),
            ("adaexp:2,5", AdaExpFactory),
            ("adaexp:2,5:0.25", AdaExpFactory),
        ],
    )
    def test_known(self, text, cls):
        assert type(parse_factory(text, SCALES)) is cls

    def test_asymptote_parsed(self):
        assert parse_factory("exp:0.25", SCALES).asymptote == 0.25

    @pytest.mark.parametrize("text", ["cubic", "poly", "poly:x", "exp:a:b", "adaexp:2", "linear:1"])
    def test_unknown(self, text):
        with pytest.raises(ValueError):
            parse_factory(text, SCALES)
