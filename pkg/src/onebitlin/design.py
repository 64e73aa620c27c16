"""
Least-squares design of the linearizers by one regularized normal-equation solve.

All designs fit a *correction* on top of the distorted input: the linear
gain is written ``1 + delta`` so that every unknown is zero for a
distortion-free frontend. Solutions are ordered ``(w_1..w_N, delta_c1, c0)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .linearizers import (
    ActivationKind,
    BranchLinearizer,
    HammersteinLinearizer,
    activation_eval,
    apply_linearizer,
    biases_proposed,
    biases_uniform,
    quantize_coeffs,
)
from .signals import as_signal

log = logging.getLogger(__name__)

DEFAULT_BMAX_GRID = tuple(round(0.1 * i, 1) for i in range(1, 10))
MAX_COND_UNREGULARIZED = 1e12
BLOCK_ROWS = 256


class DesignError(RuntimeError):
    """The normal equations could not be solved reliably."""


@dataclass(frozen=True)
class TrainingSet:
    """Reference/distorted signal pairs ``(x_r, v_r)`` of a common length."""

    pairs: tuple

    def __post_init__(self):
        pairs = tuple((as_signal(x), as_signal(v)) for x, v in self.pairs)
        if not pairs:
            raise DesignError("training set needs at least one pair")
        L = pairs[0][0].size
        for r, (x, v) in enumerate(pairs):
            if x.size != L or v.size != L:
                raise DesignError(f"pair {r} has lengths ({x.size}, {v.size}), expected {L}")
        object.__setattr__(self, "pairs", pairs)

    @property
    def R(self) -> int:
        return len(self.pairs)

    @property
    def L(self) -> int:
        return self.pairs[0][0].size

    def mse(self, lin=None) -> float:
        """Training error E; ``lin=None`` measures the uncorrected signals."""
        errs = []
        for x, v in self.pairs:
            y = v if lin is None else apply_linearizer(lin, v)
            errs.append(np.mean((y - x) ** 2))
        return float(np.mean(errs))


@dataclass(frozen=True)
class DesignConfig:
    N: int = 32
    lam: float = 2e-4
    activation: ActivationKind = ActivationKind.ONEBIT
    bmax_grid: Optional[tuple] = None
    coeff_bits: Optional[int] = 12

    def __post_init__(self):
        if self.lam < 0:
            raise DesignError("regularization weight must be >= 0")
        object.__setattr__(self, "activation", ActivationKind.parse(self.activation))
        if self.bmax_grid is not None:
            object.__setattr__(self, "bmax_grid", tuple(float(b) for b in self.bmax_grid))


@dataclass(frozen=True)
class RidgeSolution:
    params: np.ndarray
    gram: np.ndarray
    rhs: np.ndarray
    residual: float

    @property
    def relative_residual(self) -> float:
        norm = float(np.linalg.norm(self.rhs))
        return 0.0 if norm == 0 else self.residual / norm


@dataclass(frozen=True)
class Design:
    """A designed linearizer together with its design report."""

    linearizer: object
    method: str
    N: int
    lam: float
    mse_before: float
    mse_after: float
    residual: float
    relative_residual: float
    bmax: Optional[float] = None
    sweep: tuple = ()

    def report(self) -> str:
        lines = [
            f"method = {self.method}",
            f"N = {self.N}",
            f"lambda = {self.lam!r}",
        ]
        if isinstance(self.linearizer, BranchLinearizer):
            lines.append(f"activation = {self.linearizer.activation.value}")
        if self.bmax is not None:
            lines.append(f"bmax = {self.bmax!r}")
        lines += [
            f"mse_before = {self.mse_before:.17g}",
            f"mse_after = {self.mse_after:.17g}",
            f"solve_residual = {self.residual:.17g}",
            f"solve_relative_residual = {self.relative_residual:.17g}",
        ]
        for bmax, mse in self.sweep:
            lines.append(f"sweep_bmax_{bmax:g}_mse = {mse:.17g}")
        return "\n".join(lines) + "\n"


def build_regressor(v_r, biases: Sequence[float], activation) -> np.ndarray:
    """
    ``L x (N+2)`` regressor: activation columns, then ``v_r``, then ones.
    """
    v = as_signal(v_r)
    biases = np.asarray(biases, dtype=np.float64)
    A = np.empty((v.size, biases.size + 2))
    if biases.size:
        A[:, :-2] = activation_eval(activation, v[:, None], biases[None, :])
    A[:, -2] = v
    A[:, -1] = 1.0
    return A


def hammerstein_regressor(v_r, K: int) -> np.ndarray:
    """Columns ``v**2 .. v**K``, then ``v``, then ones."""
    v = as_signal(v_r)
    A = np.empty((v.size, K + 1))
    power = v.copy()
    for k in range(2, K + 1):
        power = power * v
        A[:, k - 2] = power
    A[:, -2] = v
    A[:, -1] = 1.0
    return A


def _pairwise_sum(terms: List[np.ndarray]) -> np.ndarray:
    while len(terms) > 1:
        nxt = [terms[i] + terms[i + 1] for i in range(0, len(terms) - 1, 2)]
        if len(terms) % 2:
            nxt.append(terms[-1])
        terms = nxt
    return terms[0]


def _gram_and_rhs(A: np.ndarray, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    # Blocked products reduced pairwise keep long accumulations accurate.
    blocks = range(0, A.shape[0], BLOCK_ROWS)
    grams = [A[i:i + BLOCK_ROWS].T @ A[i:i + BLOCK_ROWS] for i in blocks]
    rhss = [A[i:i + BLOCK_ROWS].T @ t[i:i + BLOCK_ROWS] for i in blocks]
    return _pairwise_sum(grams), _pairwise_sum(rhss)


def _cholesky_solve(gram: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    factor = scipy.linalg.cho_factor(gram, lower=True, check_finite=True)
    return scipy.linalg.cho_solve(factor, rhs)


def is_spd(matrix: np.ndarray) -> bool:
    """Symmetric positive-definite check via an attempted Cholesky factorization."""
    if not np.allclose(matrix, matrix.T, rtol=0, atol=0):
        return False
    try:
        scipy.linalg.cholesky(matrix, lower=True)
    except np.linalg.LinAlgError:
        return False
    return True


def ridge_solve(regressors: Iterable[np.ndarray], targets: Iterable[np.ndarray],
                lam: float) -> RidgeSolution:
    """
    Solve ``(lam I + 1/(RL) sum A_r^T A_r) w = 1/(RL) sum A_r^T t_r``.

    Raises :class:`DesignError` if the system is not positive definite or, for
    ``lam == 0``, too badly conditioned to trust.
    """
    grams, rhss, rows = [], [], 0
    for A, t in zip(regressors, targets):
        g, r = _gram_and_rhs(np.asarray(A, float), np.asarray(t, float))
        grams.append(g)
        rhss.append(r)
        rows += A.shape[0]
    if not grams:
        raise DesignError("no training data")
    gram = _pairwise_sum(grams) / rows
    rhs = _pairwise_sum(rhss) / rows
    gram = 0.5 * (gram + gram.T) + lam * np.eye(gram.shape[0])

    if lam == 0:
        cond = np.linalg.cond(gram)
        if not np.isfinite(cond) or cond > MAX_COND_UNREGULARIZED:
            raise DesignError(
                f"normal equations are ill-conditioned (cond={cond:.3g}); use lambda > 0"
            )
    try:
        params = _cholesky_solve(gram, rhs)
    except np.linalg.LinAlgError as exc:
        raise DesignError(f"normal equations are not positive definite ({exc}); "
                          "use lambda > 0") from exc
    residual = float(np.linalg.norm(gram @ params - rhs))
    return RidgeSolution(params, gram, rhs, residual)


def solve_ridge(training: TrainingSet, config: DesignConfig, biases) -> RidgeSolution:
    """Ridge solution for a branch linearizer with the given biases."""
    mats = [build_regressor(v, biases, config.activation) for _, v in training.pairs]
    targets = [x - v for x, v in training.pairs]
    return ridge_solve(mats, targets, config.lam)


def _quantized(params: np.ndarray, bits: Optional[int]) -> np.ndarray:
    return params.copy() if bits is None else quantize_coeffs(params, bits)


def _branch_from_params(params, biases, activation) -> BranchLinearizer:
    N = len(biases)
    return BranchLinearizer(
        c0=params[N + 1], c1=1.0 + params[N], biases=biases,
        weights=params[:N], activation=activation,
    )


def _branch_design(training, config, biases, method, bmax=None, sweep=(), sol=None) -> Design:
    if sol is None:
        sol = solve_ridge(training, config, biases)
    params = _quantized(sol.params, config.coeff_bits)
    lin = _branch_from_params(params, biases, config.activation)
    return Design(
        linearizer=lin, method=method, N=len(biases), lam=config.lam,
        mse_before=training.mse(), mse_after=training.mse(lin),
        residual=sol.residual, relative_residual=sol.relative_residual,
        bmax=bmax, sweep=tuple(sweep),
    )


def design_proposed(training: TrainingSet, config: DesignConfig) -> Design:
    """
    1-bit branch linearizer with the fixed bias schedule: a single solve.
    """
    if config.activation is not ActivationKind.ONEBIT:
        raise DesignError("the proposed design uses 1-bit activations")
    biases = biases_proposed(config.N)
    return _branch_design(training, config, biases, "proposed")


def design_baseline_branch(training: TrainingSet, config: DesignConfig) -> Design:
    """
    ReLU/modulus branch linearizer with uniform biases; b_max picked from a sweep.

    One solve per grid value; the solution with the lowest (unquantized)
    training error wins and is then quantized.
    """
    if config.activation is ActivationKind.ONEBIT:
        raise DesignError("baseline branch design expects ReLU or modulus activations")
    if config.N < 2:
        raise DesignError("uniform bias schedule needs N >= 2")
    grid = config.bmax_grid if config.bmax_grid is not None else DEFAULT_BMAX_GRID
    if not grid:
        raise DesignError("empty b_max grid")

    sweep = []
    best = None
    for bmax in grid:
        biases = biases_uniform(config.N, bmax)
        sol = solve_ridge(training, config, biases)
        lin = _branch_from_params(sol.params, biases, config.activation)
        mse = training.mse(lin)
        sweep.append((bmax, mse))
        if best is None or mse < best[0]:
            best = (mse, bmax, biases, sol)
    _, bmax, biases, sol = best
    log.debug("b_max sweep picked %g for N=%d (%s)", bmax, config.N, config.activation.value)
    return _branch_design(training, config, biases, config.activation.value, bmax, sweep, sol)


def design_hammerstein(training: TrainingSet, K: int, lam: float,
                       coeff_bits: Optional[int] = 12) -> Design:
    """Polynomial correction ``y = v + sum_k delta_k v**k`` fitted by the same ridge solve."""
    if K < 1:
        raise DesignError("Hammerstein order K must be >= 1")
    mats = [hammerstein_regressor(v, K) for _, v in training.pairs]
    targets = [x - v for x, v in training.pairs]
    sol = ridge_solve(mats, targets, lam)
    params = _quantized(sol.params, coeff_bits)
    d = np.concatenate(([params[-1], 1.0 + params[-2]], params[:-2]))
    lin = HammersteinLinearizer(tuple(d))
    return Design(
        linearizer=lin, method="hammerstein", N=K - 1, lam=lam,
        mse_before=training.mse(), mse_after=training.mse(lin),
        residual=sol.residual, relative_residual=sol.relative_residual,
    )
