"""
SNDR, ensemble statistics and periodograms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Tuple

import numpy as np

from .linearizers import apply_linearizer
from .signals import as_signal

SNDR_CEILING_DB = 200.0


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class SndrReport:
    """
    ``sndr_db = 10 log10(signal_power / error_power)``, capped at 200 dB when the
    error power is zero.
    """

    sndr_db: float
    signal_power: float
    error_power: float


@dataclass(frozen=True)
class EnsembleStats:
    mean_db: float
    variance_db: float
    std_db: float
    values: tuple

    @property
    def M(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class Spectrum:
    """
    One-sided spectrum on L/2+1 bins over [0, pi].

    ``power`` is the linear one-sided power per bin (it sums to the windowed
    mean-square value); ``power_db`` is normalized so its peak is 0 dB. An
    all-zero input gives ``empty=True`` and ``power_db`` of ``-inf``.
    """

    omega: np.ndarray
    power: np.ndarray
    power_db: np.ndarray
    window: str
    empty: bool = False

    @property
    def omega_over_pi(self) -> np.ndarray:
        return self.omega / np.pi


def sndr(x_ref, y) -> SndrReport:
    x_ref, y = as_signal(x_ref), as_signal(y)
    if x_ref.size != y.size:
        raise MetricsError(f"length mismatch: {x_ref.size} vs {y.size}")
    signal_power = float(np.mean(x_ref ** 2))
    error_power = float(np.mean((y - x_ref) ** 2))
    if error_power == 0.0:
        value = SNDR_CEILING_DB
    elif signal_power == 0.0:
        value = -np.inf
    else:
        value = min(SNDR_CEILING_DB, 10.0 * np.log10(signal_power / error_power))
    return SndrReport(float(value), signal_power, error_power)


def ensemble_stats(values) -> EnsembleStats:
    values = np.asarray(list(values), dtype=np.float64)
    if values.size == 0:
        raise MetricsError("empty ensemble")
    var = float(np.var(values))
    return EnsembleStats(float(np.mean(values)), var, float(np.sqrt(var)), tuple(values.tolist()))


def ensemble_sndr(design, signals: Iterable[Tuple[np.ndarray, np.ndarray]]) -> EnsembleStats:
    """
    SNDR statistics of a linearizer over ``(x_ref, v)`` pairs.

    ``design=None`` scores the uncorrected signals.
    """
    values = []
    for x_ref, v in signals:
        y = v if design is None else apply_linearizer(design, v)
        values.append(sndr(x_ref, y).sndr_db)
    return ensemble_stats(values)


def _window(name: str, L: int) -> np.ndarray:
    if name == "rectangular":
        return np.ones(L)
    if name == "hann":
        # Periodic Hann, the usual choice for spectral analysis.
        return 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(L) / L)
    raise MetricsError(f"unknown window {name!r}")


def periodogram(y, window: str = "hann") -> Spectrum:
    y = as_signal(y)
    L = y.size
    if L & (L - 1):
        raise MetricsError(f"periodogram needs a power-of-two length, got {L}")
    w = _window(window, L)
    X = np.fft.rfft(y * w)
    # Normalized by the window energy so that rectangular power sums to mean(y**2).
    power = np.abs(X) ** 2 / (L * np.sum(w ** 2))
    if L > 1:
        power[1:-1] *= 2.0
    omega = np.linspace(0.0, np.pi, L // 2 + 1)
    peak = float(np.max(power))
    if peak == 0.0:
        return Spectrum(omega, power, np.full_like(power, -np.inf), window, empty=True)
    with np.errstate(divide="ignore"):
        power_db = 10.0 * np.log10(power / peak)
    return Spectrum(omega, power, power_db, window)


def band_power_fraction(spectrum: Spectrum, lo: float, hi: float) -> float:
    """Fraction of total linear power with ``lo <= omega/pi <= hi``."""
    sel = (spectrum.omega_over_pi >= lo) & (spectrum.omega_over_pi <= hi)
    total = float(np.sum(spectrum.power))
    return float(np.sum(spectrum.power[sel]) / total) if total else 0.0
