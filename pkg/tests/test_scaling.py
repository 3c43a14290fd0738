import numpy as np
import pytest

from critsense import scaling


def test_fit_exact_power_law():
    xs = np.logspace(0, 2, 20)
    ys = 3.5 * xs**2
    expo, err, r2 = scaling.fit_power_law(xs, ys)
    assert expo == pytest.approx(2.0, abs=1e-10)
    assert r2 == pytest.approx(1.0, abs=1e-12)


def test_fit_noisy_power_law():
    rng = np.random.default_rng(3)
    xs = np.logspace(0, 2, 40)
    ys = 2.0 * xs**1.5 * np.exp(rng.normal(0, 0.02, xs.size))
    expo, err, r2 = scaling.fit_power_law(xs, ys)
    assert expo == pytest.approx(1.5, abs=0.05)
    assert err < 0.05
    assert r2 > 0.99


def test_fit_weighted():
    xs = np.logspace(0, 1, 10)
    ys = xs**-0.5
    expo, _, _ = scaling.fit_power_law(xs, ys, weights=np.ones(10))
    assert expo == pytest.approx(-0.5, abs=1e-8)


def test_fit_rejects_short_span():
    with pytest.raises(scaling.FitSpanError):
        scaling.fit_power_law(np.array([1.0, 1.5, 2.0, 2.5]),
                              np.array([1.0, 1.5, 2.0, 2.5]))


def test_fit_rejects_few_points():
    with pytest.raises(scaling.FitSpanError):
        scaling.fit_power_law(np.array([1.0, 100.0]), np.array([1.0, 100.0]))


def _dataset(sizes, fn, quantity="qfi", regime="long-time"):
    curves = []
    for n in sizes:
        xs = np.logspace(-0.5, 1.5, 30)
        curves.append((float(n), xs, fn(n, xs)))
    return scaling.ScalingDataset(curves=curves, quantity=quantity,
                                  regime=regime)


def test_collapse_perfect():
    # y = n^2 f(x / n) collapses exactly with x_exponent 1, y_exponent 2
    ds = _dataset([5, 10, 20], lambda n, xs: n**2 / (1.0 + (xs / n) ** 2))
    q = scaling.collapse_quality(ds, x_exponent=1.0, y_exponent=2.0)
    assert q < 1e-3


def test_collapse_bad_exponents_large():
    ds = _dataset([5, 10, 20], lambda n, xs: n**2 / (1.0 + (xs / n) ** 2))
    q = scaling.collapse_quality(ds, x_exponent=0.0, y_exponent=0.0)
    assert q > 0.05


def test_collapse_invariant_to_overall_scale():
    ds1 = _dataset([5, 10, 20], lambda n, xs: n**2 * np.exp(-xs / n))
    ds2 = _dataset([5, 10, 20], lambda n, xs: 7.0 * n**2 * np.exp(-xs / n))
    q1 = scaling.collapse_quality(ds1, 1.0, 2.0)
    q2 = scaling.collapse_quality(ds2, 1.0, 2.0)
    assert q1 == pytest.approx(q2, abs=1e-12)


def test_predicted_exponents_defaults():
    e = scaling.ScalingExponents()
    t_time, t_size = scaling.predicted_exponents(e, "transient")
    assert (t_time, t_size) == (3.0, 0.0)
    l_time, l_size = scaling.predicted_exponents(e, "long-time")
    assert (l_time, l_size) == (1.0, 2.0)


def test_reference_exponents():
    refs = scaling.reference_exponents(scaling.ScalingExponents())
    assert refs["heisenberg"] == (2.0, 0.0)
    assert refs["bound"] == (2.0, 1.0)


def test_windows():
    lo, hi = scaling.transient_window(10.0, 0.1)
    assert lo == pytest.approx(5.0)
    assert hi == pytest.approx(20.0)
    assert scaling.long_time_window(10.0, 0.1) == pytest.approx(300.0)


def test_window_mask():
    ts = np.array([1.0, 6.0, 15.0, 30.0])
    m = scaling.window_mask(ts, 5.0, 20.0)
    assert list(m) == [False, True, True, False]


def test_dataset_validation():
    with pytest.raises(ValueError):
        scaling.ScalingDataset(
            curves=[(5.0, np.array([1.0, 2.0]), np.array([1.0]))],
            quantity="qfi", regime="long-time")
