"""Memoryless digital linearizers with 1-bit activations and look-up-table realization."""

__version__ = "0.1.0"

from .linearizers import (
    ActivationKind,
    BranchLinearizer,
    HammersteinLinearizer,
    LutLinearizer,
    activation_eval,
    apply_branch,
    apply_hammerstein,
    apply_linearizer,
    apply_lut,
    biases_proposed,
    biases_uniform,
    build_lut,
    complexity_count,
    lut_address,
    quantize_coeffs,
)
from .signals import (
    BandpassNoiseSpec,
    MultiToneSpec,
    PolynomialDistortion,
    apply_distortion,
    gen_bandpass_noise,
    gen_multitone,
    gen_nullsub_multitone,
    normalize_gain,
    quantize_uniform,
)
from .design import DesignConfig, TrainingSet, design_baseline_branch, design_hammerstein, design_proposed
from .metrics import ensemble_sndr, periodogram, sndr

__all__ = [
    "__version__",
    "ActivationKind",
    "BranchLinearizer",
    "HammersteinLinearizer",
    "LutLinearizer",
    "activation_eval",
    "apply_branch",
    "apply_hammerstein",
    "apply_linearizer",
    "apply_lut",
    "biases_proposed",
    "biases_uniform",
    "build_lut",
    "complexity_count",
    "lut_address",
    "quantize_coeffs",
    "BandpassNoiseSpec",
    "MultiToneSpec",
    "PolynomialDistortion",
    "apply_distortion",
    "gen_bandpass_noise",
    "gen_multitone",
    "gen_nullsub_multitone",
    "normalize_gain",
    "quantize_uniform",
    "DesignConfig",
    "TrainingSet",
    "design_baseline_branch",
    "design_hammerstein",
    "design_proposed",
    "ensemble_sndr",
    "periodogram",
    "sndr",
]
