import numpy as np
import pytest

from onebitlin.linearizers import HammersteinLinearizer
from onebitlin.metrics import (
    SNDR_CEILING_DB,
    MetricsError,
    ensemble_sndr,
    ensemble_stats,
    periodogram,
    sndr,
)
from onebitlin.signals import (
    MultiToneSpec,
    PolynomialDistortion,
    apply_distortion,
    gen_multitone,
    max_gain,
    quantize_uniform,
)


def unit_power_signal(L=4096, seed=0):
    x = np.random.default_rng(seed).normal(size=L)
    x -= x.mean()
    return x / np.sqrt(np.mean(x ** 2))


def test_perfect_reconstruction_capped():
    x = unit_power_signal()
    r = sndr(x, x)
    assert r.sndr_db == SNDR_CEILING_DB and r.error_power == 0


def test_constant_offset():
    x = unit_power_signal()
    r = sndr(x, x + 0.01)
    assert r.signal_power == pytest.approx(1.0, rel=1e-12)
    assert r.error_power == pytest.approx(1e-4, rel=1e-9)
    assert r.sndr_db == pytest.approx(40.0, abs=1e-6)


def test_length_mismatch():
    with pytest.raises(MetricsError):
        sndr(np.ones(3), np.ones(4))


def test_quantized_multitone_snr_near_42db():
    model = PolynomialDistortion.standard()
    values = []
    for seed in range(5):
        base = gen_multitone(MultiToneSpec(), 8192, seed)
        x = max_gain(base, model, 2 ** -7, reference_limit=1 - 2 ** -7) * base
        values.append(sndr(x, quantize_uniform(x, 8)).sndr_db)
    assert 40 <= np.mean(values) <= 44


def test_scale_invariance():
    rng = np.random.default_rng(1)
    x = rng.normal(size=1024)
    y = x + 0.05 * rng.normal(size=1024)
    for g in (-3.0, 1e-3, 250.0):
        assert sndr(g * x, g * y).sndr_db == pytest.approx(sndr(x, y).sndr_db, abs=1e-9)


def test_sndr_decreases_with_noise():
    rng = np.random.default_rng(2)
    x = rng.normal(size=4096)
    noise = rng.normal(size=4096)
    values = [sndr(x, x + s * noise).sndr_db for s in (0.01, 0.1, 1.0)]
    assert values[0] > values[1] > values[2]


# -- ensembles --------------------------------------------------------------

def test_single_member_zero_variance():
    x = unit_power_signal()
    s = ensemble_sndr(None, [(x, x + 0.01)])
    assert s.M == 1 and s.variance_db == 0 and s.std_db == 0


def test_repeated_member():
    x = unit_power_signal()
    single = sndr(x, x + 0.02).sndr_db
    s = ensemble_sndr(None, [(x, x + 0.02)] * 10)
    assert s.variance_db == 0 and s.mean_db == single


def test_ensemble_mean_is_arithmetic_mean():
    rng = np.random.default_rng(3)
    lin = HammersteinLinearizer((0.0, 1.0, 0.01))
    pairs = [(x, x + 0.03 * rng.normal(size=x.size))
             for x in (rng.uniform(-1, 1, 512) for _ in range(17))]
    s = ensemble_sndr(lin, pairs)
    from onebitlin.linearizers import apply_linearizer
    individual = [sndr(x, apply_linearizer(lin, v)).sndr_db for x, v in pairs]
    assert s.mean_db == np.mean(individual)
    assert s.variance_db == pytest.approx(np.var(individual), rel=1e-12)
    assert s.variance_db >= 0


def test_empty_ensemble():
    with pytest.raises(MetricsError):
        ensemble_stats([])


# -- periodogram ------------------------------------------------------------

def test_bin_aligned_tone_rectangular():
    L = 8192
    n = np.arange(L)
    y = np.sin(2 * np.pi * 300 * n / L + 0.3)
    s = periodogram(y, "rectangular")
    assert s.power_db.size == L // 2 + 1
    assert s.omega[0] == 0 and s.omega[-1] == pytest.approx(np.pi)
    assert s.power_db[300] == 0.0
    others = np.delete(s.power_db, [299, 300, 301])
    assert np.max(others) < -250


def test_parseval_rectangular():
    y = np.random.default_rng(4).normal(size=1024) + 0.2
    s = periodogram(y, "rectangular")
    assert np.sum(s.power) == pytest.approx(np.mean(y ** 2), rel=1e-9)


def test_hann_peak_normalized():
    y = np.random.default_rng(5).normal(size=256)
    s = periodogram(y)
    assert s.window == "hann" and np.max(s.power_db) == 0.0


def test_distortion_creates_regrowth():
    spec = MultiToneSpec(freq_offset=0.0)
    base = gen_multitone(spec, 8192, seed=8)
    model = PolynomialDistortion.standard()
    x = max_gain(base, model, 2 ** -7) * base
    carriers = np.zeros(8192 // 2 + 1, bool)
    carriers[[128 * k for k in range(1, 32)]] = True

    def out_of_carrier_ratio(sig):
        p = periodogram(sig, "rectangular").power
        return np.sum(p[~carriers]) / np.sum(p[carriers])

    assert out_of_carrier_ratio(apply_distortion(model, x)) > 1e6 * out_of_carrier_ratio(x)


def test_all_zero_spectrum_is_empty():
    s = periodogram(np.zeros(64))
    assert s.empty and np.all(np.isneginf(s.power_db))


def test_non_power_of_two_rejected():
    with pytest.raises(MetricsError):
        periodogram(np.ones(100))


def test_unknown_window():
    with pytest.raises(MetricsError):
        periodogram(np.ones(8), "kaiser")
