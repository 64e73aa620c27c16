import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from onebitlin.metrics import band_power_fraction, periodogram, sndr
from onebitlin.signals import (
    QPSK_PHASES,
    BandpassNoiseSpec,
    MultiToneSpec,
    PolynomialDistortion,
    SignalError,
    apply_distortion,
    gen_bandpass_noise,
    gen_multitone,
    gen_nullsub_multitone,
    gen_nullsub_multitone_with_mask,
    max_gain,
    normalize_gain,
    quantize_uniform,
)

STANDARD = PolynomialDistortion.standard()


def multitone_oracle(amplitudes, phases, offset, gain, L):
    out = []
    for n in range(1, L + 1):
        acc = 0.0
        for k in range(1, 32):
            acc += amplitudes[k - 1] * math.sin((2 * math.pi * k / 64 + offset) * n + phases[k - 1])
        out.append(gain * acc)
    return np.array(out)


def horner(coeffs, x):
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


# -- model ------------------------------------------------------------------

def test_standard_model_coefficients():
    assert STANDARD.a0 == 0 and STANDARD.a1 == 1 and STANDARD.order == 10
    for p, a in enumerate(STANDARD.ap, start=2):
        assert a == pytest.approx((-1) ** p * 0.15 / p, rel=1e-15)


# -- multi-tone -------------------------------------------------------------

def test_single_tone_substitution():
    spec = MultiToneSpec.single_tone(k=1, phase=np.pi / 4, freq_offset=0.0)
    x = gen_multitone(spec, 64, seed=0)
    assert x[16 - 1] == pytest.approx(np.sqrt(2) / 2, abs=1e-12)


def test_zero_gain_gives_zeros():
    x = gen_multitone(MultiToneSpec(gain=0.0), 256, seed=3)
    assert x.shape == (256,) and not np.any(x)


def test_full_multitone_matches_scalar_oracle():
    rng = np.random.default_rng(11)
    phases = tuple(rng.choice(QPSK_PHASES, 31))
    offset = rng.uniform(-np.pi / 64, np.pi / 64)
    spec = MultiToneSpec(phases=phases, freq_offset=offset, gain=0.07)
    x = gen_multitone(spec, 8192, seed=5)
    ref = multitone_oracle([1.0] * 31, phases, offset, 0.07, 8192)
    assert np.max(np.abs(x - ref)) < 1e-12
    assert np.max(np.abs(x)) == pytest.approx(np.max(np.abs(ref)), abs=1e-12)


def test_random_fill_draws_qpsk_phases_and_offset():
    # Reconstruct the draws and compare against the oracle.
    seed = 42
    rng = np.random.default_rng(seed)
    phases = np.asarray(QPSK_PHASES)[rng.integers(0, 4, size=31)]
    offset = rng.uniform(-np.pi / 64, np.pi / 64)
    x = gen_multitone(MultiToneSpec(), 512, seed)
    assert np.max(np.abs(x - multitone_oracle([1.0] * 31, phases, offset, 1.0, 512))) < 1e-11


def test_multitone_deterministic():
    a = gen_multitone(MultiToneSpec(), 1024, seed=7)
    b = gen_multitone(MultiToneSpec(), 1024, seed=7)
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, gen_multitone(MultiToneSpec(), 1024, seed=8))


def test_invalid_phase_rejected():
    with pytest.raises(SignalError, match="QPSK"):
        MultiToneSpec(phases=(0.1,) * 31)


@pytest.mark.parametrize("offset", [np.pi / 64 * 1.0001, -np.pi / 32])
def test_offset_out_of_range_rejected(offset):
    with pytest.raises(SignalError, match="offset"):
        MultiToneSpec(freq_offset=offset)


def test_offset_at_limit_accepted():
    MultiToneSpec(freq_offset=np.pi / 64)
    MultiToneSpec(freq_offset=-np.pi / 64)


# -- null subcarriers -------------------------------------------------------

def test_nullsub_zero_is_noop():
    a = gen_multitone(MultiToneSpec(), 2048, seed=9)
    b = gen_nullsub_multitone(MultiToneSpec(), 0, 2048, seed=9)
    assert a.tobytes() == b.tobytes()


def test_nullsub_all_rejected():
    with pytest.raises(SignalError):
        gen_nullsub_multitone(MultiToneSpec(), 31, 1024, seed=1)


def test_nullsub_removes_exactly_the_chosen_tones():
    spec = MultiToneSpec(freq_offset=0.0)
    x, nulled = gen_nullsub_multitone_with_mask(spec, 8, 8192, seed=123)
    assert len(set(nulled.tolist())) == 8
    s = periodogram(x, "rectangular")
    # Tone k sits exactly on bin 128 k when the offset is zero.
    tone_db = np.array([s.power_db[128 * k] for k in range(1, 32)])
    active = np.ones(31, bool)
    active[nulled - 1] = False
    assert np.min(tone_db[active]) - np.max(tone_db[~active]) > 60
    assert np.sum(tone_db < np.min(tone_db[active]) - 60) == 8


# -- bandpass noise ---------------------------------------------------------

def test_bandpass_peak_normalization():
    x = gen_bandpass_noise(BandpassNoiseSpec(peak_target=0.9), 8192, seed=1)
    assert abs(np.max(np.abs(x)) - 0.9) <= 1e-12


def test_bandpass_power_in_band():
    x = gen_bandpass_noise(BandpassNoiseSpec(passband=(0.25, 0.75)), 8192, seed=2)
    s = periodogram(x, "rectangular")
    assert band_power_fraction(s, 0.25, 0.75) >= 0.95


def test_bandpass_deterministic():
    spec = BandpassNoiseSpec()
    assert gen_bandpass_noise(spec, 1024, 4).tobytes() == gen_bandpass_noise(spec, 1024, 4).tobytes()


def test_bandpass_filter_longer_than_signal_rejected():
    with pytest.raises(SignalError):
        gen_bandpass_noise(BandpassNoiseSpec(filter_order=128), 128, seed=0)


@pytest.mark.parametrize("band", [(0.5, 0.5), (0.6, 0.4)])
def test_degenerate_passband_rejected(band):
    with pytest.raises(SignalError):
        BandpassNoiseSpec(passband=band)


# -- distortion -------------------------------------------------------------

def test_distortion_zero_input():
    assert apply_distortion(STANDARD, np.zeros(4)).tolist() == [0.0] * 4


def test_distortion_unit_input_termwise():
    expected = 1 + sum(Fraction((-1) ** p * 15, 100 * p) for p in range(2, 11))
    v = apply_distortion(STANDARD, np.array([1.0]))[0]
    assert v == pytest.approx(float(expected), abs=1e-12)
    assert v == pytest.approx(1.053155, abs=1e-6)


def test_identity_model_is_exact():
    x = np.random.default_rng(0).uniform(-1, 1, 1000)
    assert np.array_equal(apply_distortion(PolynomialDistortion.identity(), x), x)


def test_distortion_matches_horner():
    x = np.random.default_rng(1).uniform(-1, 1, 2000)
    v = apply_distortion(STANDARD, x)
    ref = np.array([horner(STANDARD.coefficients, xi) for xi in x])
    assert np.max(np.abs(v - ref)) <= 1e-12


def test_distortion_preserves_length():
    assert apply_distortion(STANDARD, np.ones(17)).size == 17


# -- quantizer --------------------------------------------------------------

def test_quantize_zero():
    assert quantize_uniform(np.array([0.0]), 8)[0] == 0.0


def test_quantize_half_rounds_away():
    assert quantize_uniform(np.array([1 / 256]), 8)[0] == 1 / 128
    assert quantize_uniform(np.array([-1 / 256]), 8)[0] == -1 / 128


def test_quantize_clamps_top_code():
    assert quantize_uniform(np.array([1.0, -1.0]), 8).tolist() == [1 - 1 / 128, -1.0]


def test_quantize_rejects_out_of_range_with_index():
    with pytest.raises(SignalError, match="sample 2"):
        quantize_uniform(np.array([0.0, 0.5, 1.25]), 8)


def test_quantize_full_scale_sine_snr():
    n = np.arange(8192)
    x = np.sin(2 * np.pi * 0.01234567 * n)
    snr = sndr(x, quantize_uniform(x, 8)).sndr_db
    assert 48 <= snr <= 51


unit_samples = arrays(np.float64, st.integers(1, 64), elements=st.floats(-1, 1))


@given(unit_samples, st.integers(1, 16))
def test_quantize_idempotent(x, bits):
    q = quantize_uniform(x, bits)
    assert np.array_equal(quantize_uniform(q, bits), q)


@given(unit_samples, st.integers(1, 16))
def test_quantize_error_bound(x, bits):
    step = 2.0 / 2 ** bits
    err = np.abs(quantize_uniform(x, bits) - x)
    interior = x < 1 - step / 2
    assert np.all(err[interior] <= step / 2)


# -- gain normalization -----------------------------------------------------

def test_gain_identity_single_tone():
    spec = MultiToneSpec.single_tone(k=1, phase=np.pi / 4, freq_offset=0.0)
    g = normalize_gain(spec, PolynomialDistortion.identity(), 2 ** -8, L=64, seed=0)
    assert g == pytest.approx(1 - 2 ** -8, rel=1e-6)
    assert g <= 1 - 2 ** -8


def test_gain_satisfies_bound_and_is_maximal():
    spec = MultiToneSpec()
    headroom = 2 ** -7
    g = normalize_gain(spec, STANDARD, headroom, L=8192, seed=17)
    x = gen_multitone(spec.with_gain(g), 8192, seed=17)
    assert np.max(np.abs(apply_distortion(STANDARD, x))) <= 1 - headroom
    x_up = gen_multitone(spec.with_gain(1.01 * g), 8192, seed=17)
    assert np.max(np.abs(apply_distortion(STANDARD, x_up))) > 1 - headroom


def test_gain_scaling_is_bit_identical_to_generation():
    spec = MultiToneSpec()
    base = gen_multitone(spec, 1024, seed=3)
    g = 0.0731
    assert (g * base).tobytes() == gen_multitone(spec.with_gain(g), 1024, seed=3).tobytes()


def test_gain_reference_limit():
    base = gen_multitone(MultiToneSpec(), 4096, seed=21)
    g = max_gain(base, STANDARD, 2 ** -7, reference_limit=0.5)
    assert np.max(np.abs(g * base)) <= 0.5


def test_gain_infeasible_rejected():
    offset_model = PolynomialDistortion(a0=1.0, a1=1.0)
    with pytest.raises(SignalError, match="no feasible gain"):
        normalize_gain(MultiToneSpec(), offset_model, 0.01, L=256, seed=0)


@pytest.mark.parametrize("headroom", [0.0, 1.0, -0.1])
def test_gain_headroom_range(headroom):
    with pytest.raises(SignalError):
        max_gain(np.ones(4), STANDARD, headroom)
