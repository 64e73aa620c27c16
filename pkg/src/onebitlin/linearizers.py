"""
Memoryless linearizer structures.

* :class:`HammersteinLinearizer` -- static polynomial correction.
* :class:`BranchLinearizer` -- linear branch plus N weighted activations of
  biased copies of the input (1-bit, ReLU or modulus activations).
* :class:`LutLinearizer` -- the 1-bit branch linearizer with the proposed bias
  schedule realized as one multiply, one table read and one add per sample.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .signals import as_signal


class LinearizerError(ValueError):
    pass


class ActivationKind(str, enum.Enum):
    ONEBIT = "onebit"
    RELU = "relu"
    MODULUS = "modulus"

    @classmethod
    def parse(cls, value) -> "ActivationKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower().replace("-", "").replace("_", ""))
        except ValueError:
            raise LinearizerError(f"unknown activation {value!r}") from None


def activation_eval(kind, v, b):
    """``f(v + b)``: 1-bit step (fires at exactly zero), ReLU or modulus."""
    kind = ActivationKind.parse(kind)
    arg = np.add(v, b)
    if kind is ActivationKind.ONEBIT:
        out = (arg >= 0).astype(np.float64)
    elif kind is ActivationKind.RELU:
        out = np.maximum(arg, 0.0)
    else:
        out = np.abs(arg)
    return out if np.ndim(out) else float(out)


def biases_proposed(N: int) -> np.ndarray:
    """Bias schedule ``b_m = -1 + 2m/(N+1)``, m = 1..N; spans +-(N-1)/(N+1)."""
    if N < 1:
        raise LinearizerError("N must be >= 1")
    m = np.arange(1, N + 1, dtype=np.float64)
    return -1.0 + 2.0 * m / (N + 1)


def biases_uniform(N: int, b_max: float) -> np.ndarray:
    """Uniform biases ``b_m = -b_max + 2(m-1) b_max / (N-1)`` between -b_max and b_max."""
    if N < 2:
        raise LinearizerError("uniform biases need N >= 2")
    if not b_max > 0:
        raise LinearizerError("b_max must be positive")
    m = np.arange(1, N + 1, dtype=np.float64)
    b = -b_max + 2.0 * (m - 1) * b_max / (N - 1)
    b[-1] = b_max
    return b


def _float_tuple(values) -> tuple:
    return tuple(float(x) for x in np.asarray(values, dtype=np.float64).ravel())


@dataclass(frozen=True)
class HammersteinLinearizer:
    """Coefficients ``d = (d0, d1, ..., dK)`` of ``y = sum_k d_k v**k``."""

    d: tuple

    def __post_init__(self):
        d = _float_tuple(self.d)
        if len(d) < 2:
            raise LinearizerError("Hammerstein linearizer needs K >= 1")
        object.__setattr__(self, "d", d)

    @property
    def K(self) -> int:
        return len(self.d) - 1

    def __call__(self, v):
        return apply_hammerstein(self, v)


@dataclass(frozen=True)
class BranchLinearizer:
    """``y = c0 + c1 v + sum_m w_m f(v + b_m)`` with strictly increasing biases."""

    c0: float
    c1: float
    biases: tuple
    weights: tuple
    activation: ActivationKind = ActivationKind.ONEBIT

    def __post_init__(self):
        biases = _float_tuple(self.biases)
        weights = _float_tuple(self.weights)
        if len(biases) != len(weights) or not biases:
            raise LinearizerError("need N >= 1 biases and as many weights")
        if any(b1 >= b2 for b1, b2 in zip(biases, biases[1:])):
            raise LinearizerError("biases must be strictly increasing")
        object.__setattr__(self, "biases", biases)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "c0", float(self.c0))
        object.__setattr__(self, "c1", float(self.c1))
        object.__setattr__(self, "activation", ActivationKind.parse(self.activation))

    @property
    def N(self) -> int:
        return len(self.weights)

    @property
    def uses_proposed_biases(self) -> bool:
        return np.array_equal(np.asarray(self.biases), biases_proposed(self.N))

    def __call__(self, v):
        return apply_branch(self, v)


@dataclass(frozen=True)
class LutLinearizer:
    """``y = c1 v + table[q(v)]`` with a table of N+1 entries."""

    c1: float
    table: tuple

    def __post_init__(self):
        table = _float_tuple(self.table)
        if len(table) < 2:
            raise LinearizerError("table needs N+1 >= 2 entries")
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "c1", float(self.c1))

    @property
    def N(self) -> int:
        return len(self.table) - 1

    @property
    def region_count(self) -> int:
        return len(self.table)

    @property
    def address_bits(self) -> int:
        return max(1, math.ceil(math.log2(self.region_count)))

    def __call__(self, v):
        return apply_lut(self, v)


Linearizer = Union[HammersteinLinearizer, BranchLinearizer, LutLinearizer]


def apply_branch(lin: BranchLinearizer, v) -> np.ndarray:
    # Accumulate c0 and then the branches from m = N down to 1. build_lut uses
    # the same order, which makes the two realizations agree bit for bit.
    v = as_signal(v)
    acc = np.full_like(v, lin.c0)
    for b, w in zip(reversed(lin.biases), reversed(lin.weights)):
        acc = acc + w * activation_eval(lin.activation, v, b)
    return lin.c1 * v + acc


def apply_hammerstein(h: HammersteinLinearizer, v) -> np.ndarray:
    v = as_signal(v)
    y = np.full_like(v, h.d[0]) + h.d[1] * v
    power = v.copy()
    for d in h.d[2:]:
        power = power * v
        y = y + d * power
    return y


def build_lut(lin: BranchLinearizer) -> LutLinearizer:
    """
    Table ``u_0 = c0``, ``u_q = u_{q-1} + w_{N-q+1}`` for a 1-bit branch linearizer.

    Entries are running sums at full working precision. Sums of coefficients on
    a common fixed-point grid (see :func:`quantize_coeffs`) are exact, so
    ``u_q - u_{q-1} == w_{N-q+1}`` holds exactly for quantized designs.
    """
    if lin.activation is not ActivationKind.ONEBIT:
        raise LinearizerError(f"LUT realization needs 1-bit activations, got {lin.activation.value}")
    if not lin.uses_proposed_biases:
        raise LinearizerError("LUT realization needs the biases of biases_proposed(N)")
    table = [lin.c0]
    for w in reversed(lin.weights):
        table.append(table[-1] + w)
    return LutLinearizer(lin.c1, tuple(table))


def lut_thresholds(N: int) -> np.ndarray:
    """Ascending input levels ``-b_m`` at which the table address steps up by one."""
    return np.sort(-biases_proposed(N))


def lut_address(v, N: int):
    """
    Sub-region index ``q = #{m : v + b_m >= 0}`` for the proposed biases.

    The interval [-1, 1] splits into N+1 regions of width 2/(N+1); a level
    exactly on a boundary belongs to the upper region.
    """
    arr = np.asarray(v, dtype=np.float64)
    bad = np.flatnonzero(~(np.abs(arr.ravel()) <= 1.0))
    if bad.size:
        i = int(bad[0])
        raise LinearizerError(f"sample {i} has magnitude {abs(arr.ravel()[i])!r} > 1")
    # fl(v + b) >= 0 iff v >= -b exactly, so comparing against -b_m matches the
    # comparator bank bit for bit.
    q = np.searchsorted(lut_thresholds(N), arr, side="right")
    return int(q) if np.ndim(q) == 0 else q


def apply_lut(lut: LutLinearizer, v) -> np.ndarray:
    v = as_signal(v)
    q = lut_address(v, lut.N)
    return lut.c1 * v + np.asarray(lut.table)[q]


def apply_linearizer(lin: Linearizer, v) -> np.ndarray:
    if isinstance(lin, BranchLinearizer):
        return apply_branch(lin, v)
    if isinstance(lin, LutLinearizer):
        return apply_lut(lin, v)
    if isinstance(lin, HammersteinLinearizer):
        return apply_hammerstein(lin, v)
    raise TypeError(f"not a linearizer: {type(lin).__name__}")


def _round_half_away(x: np.ndarray) -> np.ndarray:
    a = np.abs(x)
    whole = np.floor(a)
    return np.copysign(whole + (a - whole >= 0.5), x)


def coeff_scale(params: Sequence[float]) -> float:
    """Smallest power of two that is >= max|param| (0.0 for an all-zero list)."""
    peak = float(np.max(np.abs(params)))
    if peak == 0.0:
        return 0.0
    mantissa, exponent = math.frexp(peak)
    return peak if mantissa == 0.5 else math.ldexp(1.0, exponent)


def quantize_coeffs(params: Sequence[float], bits: int) -> np.ndarray:
    """
    Round every parameter to a multiple of ``2**(1-bits) * S`` (halves away from zero).

    ``S`` is one power-of-two scale shared by the whole list, see
    :func:`coeff_scale`.
    """
    params = np.asarray(params, dtype=np.float64)
    if params.size == 0:
        raise LinearizerError("cannot quantize an empty coefficient list")
    if bits < 2:
        raise LinearizerError("coefficient word length must be >= 2 bits")
    scale = coeff_scale(params)
    if scale == 0.0:
        return params.copy()
    step = math.ldexp(scale, 1 - bits)
    return _round_half_away(params / step) * step + 0.0


def complexity_count(method: str, N: int) -> tuple:
    """Multiplications and additions per corrected output sample."""
    if N < 1:
        raise LinearizerError("N must be >= 1")
    method = method.lower()
    if method == "hammerstein":
        return 2 * N + 1, N + 1
    if method in ("branch", "relu", "modulus"):
        return N + 1, 2 * N + 1
    if method in ("lut", "proposed", "onebit"):
        return 1, 1
    raise LinearizerError(f"unknown method {method!r}")
