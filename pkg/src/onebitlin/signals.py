"""
Test-signal generation, memoryless distortion and amplitude quantization.

Signals are plain 1-D ``float64`` numpy arrays indexed n = 1..L.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy.signal import firwin

SeedLike = Union[int, np.random.SeedSequence, Sequence[int], None]

NUM_SUBCARRIERS = 64
NUM_TONES = 31
QPSK_PHASES = (np.pi / 4, -np.pi / 4, 3 * np.pi / 4, -3 * np.pi / 4)
MAX_FREQ_OFFSET = np.pi / 64


class SignalError(ValueError):
    """Invalid signal parameters or out-of-range samples."""


def as_signal(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise SignalError(f"signal must be a non-empty 1-D array, got shape {x.shape}")
    return x


@dataclass(frozen=True)
class PolynomialDistortion:
    """Memoryless polynomial ``v = a0 + a1*x + sum_p ap[p-2] * x**p``."""

    a0: float = 0.0
    a1: float = 1.0
    ap: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "ap", tuple(float(a) for a in self.ap))

    @property
    def order(self) -> int:
        return 1 + len(self.ap)

    @property
    def coefficients(self) -> list:
        """All coefficients ``[a0, a1, a2, ..., aP]``."""
        return [float(self.a0), float(self.a1), *self.ap]

    @classmethod
    def from_coefficients(cls, coeffs: Sequence[float]) -> "PolynomialDistortion":
        coeffs = [float(c) for c in coeffs]
        if len(coeffs) < 2:
            raise SignalError("need at least a0 and a1")
        return cls(coeffs[0], coeffs[1], tuple(coeffs[2:]))

    @classmethod
    def standard(cls, order: int = 10, scale: float = 0.15) -> "PolynomialDistortion":
        """Evaluation model ``a0 = 0, a1 = 1, a_p = (-1)**p * scale / p``."""
        return cls(0.0, 1.0, tuple((-1) ** p * scale / p for p in range(2, order + 1)))

    @classmethod
    def identity(cls) -> "PolynomialDistortion":
        return cls(0.0, 1.0, ())


@dataclass(frozen=True)
class MultiToneSpec:
    """
    Parameters of the 64-subcarrier multi-tone (OFDM quadrature part) signal.

    ``phases`` and ``freq_offset`` may be left as ``None``; they are then drawn
    from the seed passed to the generator (QPSK phases uniformly, offset
    uniformly in [-pi/64, pi/64]).
    """

    amplitudes: tuple = (1.0,) * NUM_TONES
    active: tuple = (True,) * NUM_TONES
    phases: Optional[tuple] = None
    freq_offset: Optional[float] = None
    gain: float = 1.0
    total_subcarriers: int = NUM_SUBCARRIERS

    def __post_init__(self):
        for name in ("amplitudes", "active"):
            value = tuple(getattr(self, name))
            if len(value) != NUM_TONES:
                raise SignalError(f"{name} must have {NUM_TONES} entries, got {len(value)}")
            object.__setattr__(self, name, value)
        if self.phases is not None:
            phases = tuple(float(p) for p in self.phases)
            if len(phases) != NUM_TONES:
                raise SignalError(f"phases must have {NUM_TONES} entries")
            for k, p in enumerate(phases, start=1):
                if not any(np.isclose(p, q, rtol=0, atol=1e-12) for q in QPSK_PHASES):
                    raise SignalError(f"phase of tone k={k} is {p!r}, not a QPSK phase")
            object.__setattr__(self, "phases", phases)
        if self.freq_offset is not None and abs(self.freq_offset) > MAX_FREQ_OFFSET:
            raise SignalError(
                f"frequency offset {self.freq_offset!r} outside [-pi/64, pi/64]"
            )

    @property
    def num_active(self) -> int:
        return sum(bool(a) for a in self.active)

    def with_gain(self, gain: float) -> "MultiToneSpec":
        return MultiToneSpec(
            self.amplitudes, self.active, self.phases, self.freq_offset, gain,
            self.total_subcarriers,
        )

    @classmethod
    def single_tone(cls, k: int = 1, phase: float = np.pi / 4, freq_offset: float = 0.0,
                    amplitude: float = 1.0, gain: float = 1.0) -> "MultiToneSpec":
        active = tuple(i == k for i in range(1, NUM_TONES + 1))
        amplitudes = tuple(amplitude if a else 0.0 for a in active)
        return cls(amplitudes, active, (phase,) * NUM_TONES, freq_offset, gain)


@dataclass(frozen=True)
class BandpassNoiseSpec:
    """Passband edges are fractions of pi (Nyquist = 1.0)."""

    passband: tuple = (0.25, 0.75)
    filter_order: int = 128
    peak_target: float = 1.0

    def __post_init__(self):
        lo, hi = (float(e) for e in self.passband)
        if not 0.0 <= lo < hi <= 1.0:
            raise SignalError(f"degenerate passband {self.passband!r}")
        if self.filter_order < 2 or self.filter_order % 2:
            raise SignalError("filter_order must be even and >= 2 (type I linear phase)")
        if self.peak_target <= 0:
            raise SignalError("peak_target must be positive")
        object.__setattr__(self, "passband", (lo, hi))


def _rng(seed: SeedLike) -> np.random.Generator:
    return np.random.default_rng(seed)


def _draw_tone_parameters(spec: MultiToneSpec, rng: np.random.Generator):
    # Fixed draw order (phases, then offset) so derived generators share the stream.
    if spec.phases is None:
        idx = rng.integers(0, len(QPSK_PHASES), size=NUM_TONES)
        phases = np.asarray(QPSK_PHASES)[idx]
    else:
        phases = np.asarray(spec.phases)
    if spec.freq_offset is None:
        offset = rng.uniform(-MAX_FREQ_OFFSET, MAX_FREQ_OFFSET)
    else:
        offset = float(spec.freq_offset)
    return phases, offset


def _synthesize(amplitudes, phases, offset, gain, L, total=NUM_SUBCARRIERS):
    k = np.arange(1, NUM_TONES + 1)
    omega = 2 * np.pi * k / total + offset
    n = np.arange(1, L + 1, dtype=np.float64)
    tones = np.sin(np.outer(n, omega) + phases)
    return gain * (tones @ amplitudes)


def _active_amplitudes(spec: MultiToneSpec) -> np.ndarray:
    return np.where(np.asarray(spec.active, dtype=bool), np.asarray(spec.amplitudes, float), 0.0)


def gen_multitone(spec: MultiToneSpec, L: int, seed: SeedLike = None) -> np.ndarray:
    """
    Multi-tone signal ``G * sum_k A_k sin(w_k n + alpha_k)``, ``w_k = 2 pi k / 64 + dw``.

    Inactive tones contribute nothing. Same spec and seed give bitwise-identical
    output.
    """
    if L < 1:
        raise SignalError("L must be >= 1")
    phases, offset = _draw_tone_parameters(spec, _rng(seed))
    return _synthesize(_active_amplitudes(spec), phases, offset, spec.gain, L,
                       spec.total_subcarriers)


def gen_nullsub_multitone(spec: MultiToneSpec, num_nulled: int, L: int,
                          seed: SeedLike = None) -> np.ndarray:
    """Multi-tone signal with ``num_nulled`` randomly chosen active tones set to zero."""
    return gen_nullsub_multitone_with_mask(spec, num_nulled, L, seed)[0]


def gen_nullsub_multitone_with_mask(spec, num_nulled, L, seed=None):
    """As :func:`gen_nullsub_multitone`, also returning the 1-based nulled tone indices."""
    if L < 1:
        raise SignalError("L must be >= 1")
    active_idx = np.flatnonzero(np.asarray(spec.active, dtype=bool))
    if not 0 <= num_nulled < active_idx.size:
        raise SignalError(
            f"num_nulled={num_nulled} must be in [0, {active_idx.size - 1}]"
        )
    rng = _rng(seed)
    phases, offset = _draw_tone_parameters(spec, rng)
    amplitudes = _active_amplitudes(spec)
    nulled = np.empty(0, dtype=int)
    if num_nulled:
        nulled = np.sort(rng.choice(active_idx, size=num_nulled, replace=False))
        amplitudes[nulled] = 0.0
    x = _synthesize(amplitudes, phases, offset, spec.gain, L, spec.total_subcarriers)
    return x, nulled + 1


def bandpass_taps(spec: BandpassNoiseSpec) -> np.ndarray:
    lo, hi = spec.passband
    numtaps = spec.filter_order + 1
    if lo == 0.0 and hi == 1.0:
        raise SignalError("passband covers the whole band; nothing to filter")
    if lo == 0.0:
        return firwin(numtaps, hi)
    if hi == 1.0:
        return firwin(numtaps, lo, pass_zero=False)
    return firwin(numtaps, [lo, hi], pass_zero=False)


def gen_bandpass_noise(spec: BandpassNoiseSpec, L: int, seed: SeedLike = None) -> np.ndarray:
    """
    White Gaussian noise through a windowed-sinc linear-phase bandpass filter,
    scaled so that ``max|x| == spec.peak_target``.
    """
    if L <= spec.filter_order:
        raise SignalError(f"L={L} must exceed filter_order={spec.filter_order}")
    taps = bandpass_taps(spec)
    noise = _rng(seed).standard_normal(L + spec.filter_order)
    x = np.convolve(noise, taps, mode="valid")
    peak = np.max(np.abs(x))
    if peak == 0:
        raise SignalError("filtered noise is identically zero")
    x = x * (spec.peak_target / peak)
    # Exact peak despite the rounding of the scale factor.
    i = int(np.argmax(np.abs(x)))
    x[i] = np.copysign(spec.peak_target, x[i])
    return x


def apply_distortion(model: PolynomialDistortion, x) -> np.ndarray:
    x = as_signal(x)
    v = np.full_like(x, model.a0) + model.a1 * x
    power = x.copy()
    for a in model.ap:
        power = power * x
        v = v + a * power
    return v


def quantize_uniform(x, bits: int) -> np.ndarray:
    """
    Midtread uniform quantizer on [-1, 1) with step ``2 / 2**bits``.

    Halves round away from zero; the positive full-scale code is clamped to
    ``1 - step``. Samples with magnitude above one are rejected.
    """
    if bits < 1:
        raise SignalError("bits must be >= 1")
    x = as_signal(x)
    bad = np.flatnonzero(~(np.abs(x) <= 1.0))
    if bad.size:
        i = int(bad[0])
        raise SignalError(f"sample {i} has magnitude {abs(x[i])!r} > 1")
    step = 2.0 / 2**bits
    # |x| / step is exact (power-of-two step), so the half test is exact too.
    scaled = np.abs(x) / step
    whole = np.floor(scaled)
    codes = whole + (scaled - whole >= 0.5)
    y = np.copysign(codes * step, x)
    return np.clip(y, -1.0, 1.0 - step) + 0.0


def max_gain(base, model: PolynomialDistortion, headroom: float, *,
             reference_limit: Optional[float] = None, rtol: float = 1e-6,
             max_doublings: int = 60) -> float:
    """
    Largest gain G such that ``max|apply_distortion(model, G*base)| <= 1 - headroom``.

    Bisection on G against the realized distorted peak. With ``reference_limit``
    the undistorted peak ``max|G*base|`` is bounded as well.
    """
    if not 0 < headroom < 1:
        raise SignalError("headroom must lie in (0, 1)")
    base = as_signal(base)
    peak = float(np.max(np.abs(base)))
    limit = 1.0 - headroom
    if peak == 0:
        raise SignalError("base signal is identically zero; gain is unbounded")

    def feasible(g):
        if reference_limit is not None and g * peak > reference_limit:
            return False
        return float(np.max(np.abs(apply_distortion(model, g * base)))) <= limit

    lo, hi = 0.0, 1.0 / peak
    for _ in range(max_doublings):
        if not feasible(hi):
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise SignalError("gain search did not find an upper bound")
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    if lo == 0.0 or not feasible(lo):
        raise SignalError("no feasible gain: distorted peak exceeds the limit at any G > 0")
    return lo


def normalize_gain(spec: MultiToneSpec, model: PolynomialDistortion, headroom: float,
                   L: int = 8192, seed: SeedLike = None, **kwargs) -> float:
    """
    Gain for ``spec`` such that the distorted multi-tone stays within ``1 - headroom``.

    The signal is generated once at unit gain; generation is linear in G, so
    scaling it reproduces the signal at any gain bit for bit.
    """
    base = gen_multitone(spec.with_gain(1.0), L, seed)
    return max_gain(base, model, headroom, **kwargs)
