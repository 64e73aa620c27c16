"""
Experiment orchestration for the multi-tone (Example 1) and robustness
(Example 2) studies, and the exhaustive LUT equivalence check.

Seed policy: every signal draws from its own stream
``SeedSequence(master_seed, spawn_key=(stream, index))``. Training uses
multi-tone indices ``0..R-1`` and evaluation ``R..R+M-1`` of the same stream,
so the two sets never overlap. Every signal gets its own gain, the largest for
which the distorted signal stays one quantization step below full scale and
the clean reference stays within the quantizer range.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import __version__
from .design import (
    DEFAULT_BMAX_GRID,
    DesignConfig,
    DesignError,
    TrainingSet,
    design_baseline_branch,
    design_hammerstein,
    design_proposed,
)
from .io import (
    dump_kv,
    fmt,
    fmt_list,
    load_linearizer,
    parse_kv,
    parse_list,
    save_linearizer,
    write_csv,
    write_spectrum,
)
from .linearizers import (
    BranchLinearizer,
    LinearizerError,
    LutLinearizer,
    apply_branch,
    apply_linearizer,
    apply_lut,
    build_lut,
    complexity_count,
)
from .metrics import EnsembleStats, ensemble_sndr, ensemble_stats, periodogram, sndr
from .signals import (
    BandpassNoiseSpec,
    MultiToneSpec,
    PolynomialDistortion,
    SignalError,
    apply_distortion,
    gen_bandpass_noise,
    gen_multitone,
    gen_nullsub_multitone,
    max_gain,
    quantize_uniform,
)

log = logging.getLogger(__name__)

STREAMS = {"multitone": 0, "nullsub": 1, "bandpass": 2}
METHODS = ("hammerstein", "relu", "modulus", "proposed")
DEFAULT_N_SWEEP = (2, 4, 8, 12, 16, 20, 24, 28, 32)


class HarnessError(RuntimeError):
    pass


class LutMismatchError(HarnessError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    master_seed: int = 2024
    R: int = 1
    M: int = 100
    L: int = 8192
    N_sweep: tuple = DEFAULT_N_SWEEP
    lam: float = 2e-4
    signal_bits: int = 8
    coeff_bits: int = 12
    distortion: PolynomialDistortion = field(default_factory=PolynomialDistortion.standard)
    output_dir: str = "results"
    num_nulled: int = 8
    bmax_grid: tuple = DEFAULT_BMAX_GRID
    spectrum_N: int = 32

    def __post_init__(self):
        object.__setattr__(self, "N_sweep", tuple(int(n) for n in self.N_sweep))
        object.__setattr__(self, "bmax_grid", tuple(float(b) for b in self.bmax_grid))
        object.__setattr__(self, "output_dir", str(self.output_dir))
        if self.R < 1 or self.M < 1 or self.L < 1:
            raise HarnessError("R, M and L must be >= 1")
        if not self.N_sweep or min(self.N_sweep) < 1:
            raise HarnessError("N_sweep must be a non-empty list of counts >= 1")
        if self.signal_bits < 1 or self.coeff_bits < 2:
            raise HarnessError("signal_bits must be >= 1 and coeff_bits >= 2")

    @property
    def headroom(self) -> float:
        return 2.0 / 2 ** self.signal_bits

    @property
    def representative_N(self) -> int:
        return self.spectrum_N if self.spectrum_N in self.N_sweep else max(self.N_sweep)

    def to_kv(self) -> Dict[str, str]:
        return {
            "master_seed": str(self.master_seed),
            "R": str(self.R),
            "M": str(self.M),
            "L": str(self.L),
            "N_sweep": ", ".join(str(n) for n in self.N_sweep),
            "lambda": fmt(self.lam),
            "signal_bits": str(self.signal_bits),
            "coeff_bits": str(self.coeff_bits),
            "distortion": fmt_list(self.distortion.coefficients),
            "output_dir": self.output_dir,
            "num_nulled": str(self.num_nulled),
            "bmax_grid": fmt_list(self.bmax_grid),
            "spectrum_N": str(self.spectrum_N),
        }

    @classmethod
    def from_kv(cls, kv: Dict[str, str], base: Optional["ExperimentConfig"] = None) -> "ExperimentConfig":
        """Override ``base`` (defaults if omitted) with the given keys."""
        base = base or cls()
        converters = {
            "master_seed": ("master_seed", int),
            "R": ("R", int),
            "M": ("M", int),
            "L": ("L", int),
            "N_sweep": ("N_sweep", lambda s: tuple(int(t) for t in s.split(","))),
            "lambda": ("lam", float),
            "signal_bits": ("signal_bits", int),
            "coeff_bits": ("coeff_bits", int),
            "distortion": ("distortion", parse_distortion),
            "output_dir": ("output_dir", str),
            "num_nulled": ("num_nulled", int),
            "bmax_grid": ("bmax_grid", lambda s: tuple(parse_list(s))),
            "spectrum_N": ("spectrum_N", int),
        }
        updates = {}
        for key, value in kv.items():
            if key not in converters:
                raise HarnessError(f"unknown config key {key!r}")
            name, conv = converters[key]
            try:
                updates[name] = conv(value)
            except (ValueError, SignalError) as exc:
                raise HarnessError(f"bad value for {key!r}: {value!r} ({exc})") from exc
        return replace(base, **updates)

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        return cls.from_kv(parse_kv(text))

    def to_text(self) -> str:
        return dump_kv(self.to_kv())


def parse_distortion(text: str) -> PolynomialDistortion:
    """``standard``, ``identity`` or a coefficient list ``a0, a1, a2, ...``."""
    key = text.strip().lower()
    if key == "standard":
        return PolynomialDistortion.standard()
    if key in ("identity", "none"):
        return PolynomialDistortion.identity()
    return PolynomialDistortion.from_coefficients(parse_list(text))


def signal_seed(master_seed: int, stream: str, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(STREAMS[stream], index))


@dataclass(frozen=True)
class Pair:
    """Clean reference ``x``, quantized distorted ``v`` and the gain used."""

    x: np.ndarray
    v: np.ndarray
    gain: float
    index: int


def _base_signal(config: ExperimentConfig, stream: str, index: int) -> np.ndarray:
    seed = signal_seed(config.master_seed, stream, index)
    if stream == "multitone":
        return gen_multitone(MultiToneSpec(), config.L, seed)
    if stream == "nullsub":
        return gen_nullsub_multitone(MultiToneSpec(), config.num_nulled, config.L, seed)
    if stream == "bandpass":
        return gen_bandpass_noise(BandpassNoiseSpec(), config.L, seed)
    raise HarnessError(f"unknown signal stream {stream!r}")


def make_pair(config: ExperimentConfig, stream: str, index: int) -> Pair:
    base = _base_signal(config, stream, index)
    limit = 1.0 - config.headroom
    gain = max_gain(base, config.distortion, config.headroom, reference_limit=limit)
    x = gain * base
    v = quantize_uniform(apply_distortion(config.distortion, x), config.signal_bits)
    return Pair(x, v, gain, index)


def make_ensemble(config: ExperimentConfig, stream: str, indices) -> List[Pair]:
    return [make_pair(config, stream, i) for i in indices]


def training_pairs(config: ExperimentConfig) -> List[Pair]:
    return make_ensemble(config, "multitone", range(config.R))


def evaluation_pairs(config: ExperimentConfig) -> List[Pair]:
    return make_ensemble(config, "multitone", range(config.R, config.R + config.M))


def design_method(method: str, training: TrainingSet, N: int, config: ExperimentConfig):
    if method == "proposed":
        return design_proposed(training, DesignConfig(N, config.lam, "onebit", None, config.coeff_bits))
    if method in ("relu", "modulus"):
        cfg = DesignConfig(N, config.lam, method, config.bmax_grid, config.coeff_bits)
        return design_baseline_branch(training, cfg)
    if method == "hammerstein":
        return design_hammerstein(training, N + 1, config.lam, config.coeff_bits)
    raise HarnessError(f"unknown method {method!r}")


@dataclass
class Cell:
    method: str
    N: int
    mults: int
    adds: int
    stats: Optional[EnsembleStats] = None
    relative_residual: float = float("nan")
    bmax: Optional[float] = None
    linearizer_path: Optional[str] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class RunManifest:
    config: ExperimentConfig
    seeds: Dict[str, str]
    files: Dict[str, str]
    summary: Dict[str, object]
    cells: List[Cell] = field(default_factory=list)
    version: str = __version__
    designs: Dict[Tuple[str, int], object] = field(default_factory=dict, repr=False)
    uncorrected: Optional[EnsembleStats] = None
    undistorted: Optional[EnsembleStats] = None
    # Example 2: ensemble name -> (linearized stats, uncorrected stats)
    results: Dict[str, tuple] = field(default_factory=dict, repr=False)

    def cell(self, method: str, N: int) -> Cell:
        for c in self.cells:
            if c.method == method and c.N == N:
                return c
        raise KeyError((method, N))

    def to_text(self) -> str:
        lines = [f"# onebitlin {self.version} run manifest", "[config]"]
        lines += [f"{k} = {v}" for k, v in self.config.to_kv().items()]
        lines.append("[seeds]")
        lines += [f"{k} = {v}" for k, v in self.seeds.items()]
        lines.append("[files]")
        lines += [f"{k} = {v}" for k, v in self.files.items()]
        lines.append("[summary]")
        lines += [f"{k} = {fmt(v) if isinstance(v, float) else v}" for k, v in self.summary.items()]
        if self.cells:
            lines.append("[cells]")
            lines.append("# method, N, mults, adds, mean_sndr_db, var_db, relative_residual, bmax, status")
            for c in self.cells:
                mean = fmt(c.stats.mean_db) if c.stats else "nan"
                var = fmt(c.stats.variance_db) if c.stats else "nan"
                bmax = "" if c.bmax is None else fmt(c.bmax)
                status = "ok" if c.ok else f"failed: {c.error}"
                lines.append(f"{c.method}, {c.N}, {c.mults}, {c.adds}, {mean}, {var}, "
                             f"{fmt(c.relative_residual)}, {bmax}, {status}")
        return "\n".join(lines) + "\n"


def config_from_manifest(text: str) -> ExperimentConfig:
    """Re-parse the ``[config]`` section of a manifest."""
    section, kv = None, {}
    for line in text.splitlines():
        line = line.strip()
        if line.startswith("["):
            section = line
        elif section == "[config]" and "=" in line and not line.startswith("#"):
            k, v = line.split("=", 1)
            kv[k.strip()] = v.strip()
    return ExperimentConfig.from_kv(kv)


def _seed_policy(config: ExperimentConfig) -> Dict[str, str]:
    R, M = config.R, config.M
    return {
        "policy": f"SeedSequence({config.master_seed}, spawn_key=(stream, index))",
        "training": f"stream multitone={STREAMS['multitone']}, indices 0..{R - 1}",
        "evaluation": f"stream multitone={STREAMS['multitone']}, indices {R}..{R + M - 1}",
        "nullsub": f"stream nullsub={STREAMS['nullsub']}, indices 0..{M - 1}",
        "bandpass": f"stream bandpass={STREAMS['bandpass']}, indices 0..{M - 1}",
    }


def _comment(config: ExperimentConfig) -> str:
    return f"onebitlin {__version__} master_seed={config.master_seed}"


def _stats_row(stats: EnsembleStats):
    return [stats.mean_db, stats.variance_db, stats.std_db]


def _write_per_signal(path, pairs, lin, config) -> int:
    rows = []
    for p in pairs:
        y = p.v if lin is None else apply_linearizer(lin, p.v)
        rows.append((p.index, sndr(p.x, y).sndr_db))
    return write_csv(path, ["signal_index", "sndr_db"], rows, _comment(config))


def _write_spectra(out: Path, prefix: str, pair: Pair, lin, config, files: Dict[str, str]):
    for tag, sig in (("reference", pair.x), ("before", pair.v),
                     ("after", apply_linearizer(lin, pair.v))):
        path = out / f"{prefix}_{tag}.csv"
        write_spectrum(path, periodogram(sig, "hann"), _comment(config))
        files[f"{prefix}_{tag}"] = path.name


def run_example1(config: ExperimentConfig, write: bool = True) -> RunManifest:
    """
    Design every method at every N on the training signal(s) and score it on the
    evaluation ensemble. Failed cells are recorded and the sweep continues.
    """
    out = Path(config.output_dir)
    lin_dir = out / "linearizers"
    if write:
        lin_dir.mkdir(parents=True, exist_ok=True)

    train = training_pairs(config)
    evals = evaluation_pairs(config)
    training = TrainingSet(tuple((p.x, p.v) for p in train))

    uncorrected = ensemble_sndr(None, ((p.x, p.v) for p in evals))
    undistorted = ensemble_stats(
        sndr(p.x, quantize_uniform(p.x, config.signal_bits)).sndr_db for p in evals
    )
    manifest = RunManifest(config, _seed_policy(config), {}, {})

    for N in config.N_sweep:
        for method in METHODS:
            mults, adds = complexity_count(method, N)
            cell = Cell(method, N, mults, adds)
            try:
                design = design_method(method, training, N, config)
            except (DesignError, LinearizerError) as exc:
                cell.error = str(exc)
                log.warning("design %s N=%d failed: %s", method, N, exc)
                manifest.cells.append(cell)
                continue
            lin = design.linearizer
            if method == "proposed":
                lin = build_lut(lin)
            cell.stats = ensemble_sndr(lin, ((p.x, p.v) for p in evals))
            cell.relative_residual = design.relative_residual
            cell.bmax = design.bmax
            manifest.designs[(method, N)] = design.linearizer
            if write:
                path = lin_dir / f"{method}_N{N}.txt"
                save_linearizer(path, design.linearizer)
                cell.linearizer_path = str(path.relative_to(out))
            manifest.cells.append(cell)

    ok = [c for c in manifest.cells if c.ok]
    manifest.summary.update({
        "uncorrected_mean_sndr_db": uncorrected.mean_db,
        "uncorrected_var_db": uncorrected.variance_db,
        "uncorrected_std_db": uncorrected.std_db,
        "undistorted_mean_snr_db": undistorted.mean_db,
        "undistorted_var_db": undistorted.variance_db,
        "max_relative_residual": max((c.relative_residual for c in ok), default=float("nan")),
        "failed_cells": len(manifest.cells) - len(ok),
    })
    manifest.uncorrected = uncorrected
    manifest.undistorted = undistorted

    if not write:
        return manifest

    comment = _comment(config)
    rows = [[c.method, c.N, *(_stats_row(c.stats) if c.ok else [float("nan")] * 3)]
            for c in manifest.cells]
    write_csv(out / "sndr_vs_N.csv", ["method", "N", "mean_sndr_db", "var_db", "std_db"], rows, comment)
    rows = [[c.method, c.N, c.mults, c.adds, c.stats.mean_db if c.ok else float("nan")]
            for c in manifest.cells]
    write_csv(out / "sndr_vs_mults.csv", ["method", "N", "mults", "adds", "mean_sndr_db"], rows, comment)
    write_csv(out / "reference_levels.csv", ["quantity", "mean_db", "var_db", "std_db"],
              [["uncorrected", *_stats_row(uncorrected)], ["undistorted", *_stats_row(undistorted)]],
              comment)
    manifest.files.update({
        "sndr_vs_N": "sndr_vs_N.csv",
        "sndr_vs_mults": "sndr_vs_mults.csv",
        "reference_levels": "reference_levels.csv",
    })

    n_rep = config.representative_N
    rep = manifest.designs.get(("proposed", n_rep))
    _write_per_signal(out / "sndr_per_signal_uncorrected.csv", evals, None, config)
    manifest.files["sndr_per_signal_uncorrected"] = "sndr_per_signal_uncorrected.csv"
    if rep is not None:
        name = f"sndr_per_signal_proposed_N{n_rep}"
        _write_per_signal(out / f"{name}.csv", evals, rep, config)
        manifest.files[name] = f"{name}.csv"
        _write_spectra(out, f"spectrum_ex1_N{n_rep}", evals[0], rep, config, manifest.files)
    for c in manifest.cells:
        if c.linearizer_path:
            manifest.files[f"linearizer_{c.method}_N{c.N}"] = c.linearizer_path
    (out / "manifest_example1.txt").write_text(manifest.to_text())
    return manifest


def run_example2(config: ExperimentConfig, designed=None, write: bool = True) -> RunManifest:
    """
    Score a fixed 1-bit linearizer from Example 1 on null-subcarrier and
    bandpass-noise ensembles, relative to its Example 1 ensemble mean.

    ``designed`` may be a linearizer or a path; by default the proposed design
    at the representative N is loaded from the Example 1 output directory.
    """
    out = Path(config.output_dir)
    if designed is None:
        designed = out / "linearizers" / f"proposed_N{config.representative_N}.txt"
    if isinstance(designed, (str, Path)):
        if not Path(designed).exists():
            raise HarnessError(f"designed linearizer not found: {designed} (run example1 first)")
        designed = load_linearizer(designed)
    if not isinstance(designed, (BranchLinearizer, LutLinearizer)):
        raise HarnessError("example 2 evaluates a 1-bit branch or LUT linearizer")
    lin = build_lut(designed) if isinstance(designed, BranchLinearizer) else designed

    ensembles = {
        "example1": evaluation_pairs(config),
        "nullsub": make_ensemble(config, "nullsub", range(config.M)),
        "bandpass": make_ensemble(config, "bandpass", range(config.M)),
    }
    results = {name: (ensemble_sndr(lin, ((p.x, p.v) for p in pairs)),
                      ensemble_sndr(None, ((p.x, p.v) for p in pairs)))
               for name, pairs in ensembles.items()}
    ref_mean = results["example1"][0].mean_db

    manifest = RunManifest(config, _seed_policy(config), {}, {})
    manifest.results = results
    for name, (stats, raw) in results.items():
        manifest.summary[f"{name}_mean_sndr_db"] = stats.mean_db
        manifest.summary[f"{name}_var_db"] = stats.variance_db
        manifest.summary[f"{name}_uncorrected_mean_sndr_db"] = raw.mean_db
        manifest.summary[f"{name}_degradation_db"] = ref_mean - stats.mean_db
    if not write:
        return manifest

    out.mkdir(parents=True, exist_ok=True)
    comment = _comment(config)
    rows = [[name, stats.M, *_stats_row(stats), raw.mean_db, ref_mean - stats.mean_db]
            for name, (stats, raw) in results.items()]
    write_csv(out / "example2_summary.csv",
              ["ensemble", "M", "mean_sndr_db", "var_db", "std_db", "uncorrected_mean_sndr_db",
               "degradation_db"], rows, comment)
    manifest.files["example2_summary"] = "example2_summary.csv"
    for name in ("nullsub", "bandpass"):
        fname = f"sndr_per_signal_ex2_{name}.csv"
        _write_per_signal(out / fname, ensembles[name], lin, config)
        manifest.files[f"sndr_per_signal_ex2_{name}"] = fname
        _write_spectra(out, f"spectrum_ex2_{name}", ensembles[name][0], lin, config, manifest.files)
    (out / "manifest_example2.txt").write_text(manifest.to_text())
    return manifest


def input_levels(bits: int) -> np.ndarray:
    """All codes of the ``bits``-bit midtread quantizer, ascending from -1."""
    step = 2.0 / 2 ** bits
    return np.arange(-(2 ** (bits - 1)), 2 ** (bits - 1)) * step


def lut_discrepancy(lin: BranchLinearizer, bits: int = 8) -> Tuple[float, Optional[float]]:
    """Max |branch - LUT| over every quantizer level, and the first offending level."""
    levels = input_levels(bits)
    diff = np.abs(apply_branch(lin, levels) - apply_lut(build_lut(lin), levels))
    bad = np.flatnonzero(diff != 0)
    return float(np.max(diff)), (float(levels[bad[0]]) if bad.size else None)


@dataclass(frozen=True)
class LutCheck:
    N: int
    levels: int
    max_discrepancy: float
    offending_level: Optional[float]


def verify_lut(config: ExperimentConfig, linearizers=None, write: bool = True) -> List[LutCheck]:
    """
    Exhaustive branch-versus-LUT comparison over all ``2**signal_bits`` levels,
    for the proposed design at every N in the sweep (or for given linearizers).
    Raises :class:`LutMismatchError` on any nonzero discrepancy.
    """
    if linearizers is None:
        train = training_pairs(config)
        training = TrainingSet(tuple((p.x, p.v) for p in train))
        linearizers = [design_method("proposed", training, N, config).linearizer
                       for N in config.N_sweep]
    checks = []
    for lin in linearizers:
        worst, level = lut_discrepancy(lin, config.signal_bits)
        checks.append(LutCheck(lin.N, 2 ** config.signal_bits, worst, level))
    if write:
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "verify_lut.csv", ["N", "levels", "max_discrepancy"],
                  [[c.N, c.levels, c.max_discrepancy] for c in checks], _comment(config))
    for c in checks:
        if c.max_discrepancy != 0:
            raise LutMismatchError(
                f"branch and LUT outputs differ by {c.max_discrepancy!r} at level "
                f"{c.offending_level!r} for N={c.N}"
            )
    return checks
