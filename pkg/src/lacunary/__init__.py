"""Sparse spectra, rank-one perturbation determinants and canonical-product constructions."""

from .counterexample import (
    CanonicalProduct,
    CounterexampleBundle,
    block_product,
    build_counterexample,
    defect_rank,
    greedy_block,
    interpolation_residual,
    verify_sums,
)
from .errors import (
    AnchorUnsuitable,
    ContourError,
    DomainError,
    InsufficientSparseness,
    LacunaryError,
    PoleError,
    PrecisionWarning,
    SearchFailure,
    UnsupportedInput,
)
from .meromorphics import (
    Annulus,
    MeromorphicSum,
    ZeroSet,
    beta_eval,
    beta_zeros,
    limst_probe,
    psi_eval,
    resolvent_norm_probe,
    sector_localization_check,
    spectrum_from_beta,
    zero_free_radii,
)
from .perturbation import (
    RankOneData,
    build_truncated_matrix,
    degeneracy_check,
    kernel_chain_dims,
    moment_equalities_check,
    moment_sum,
    singular_to_bounded,
)
from .polya import GridFunction, PeakInput, divided_interval, lacunary_lower_bound_probe, polya_peaks
from .spectra import (
    SpectrumSequence,
    bon_witness,
    check_lacunary,
    counting_function,
    log2_density_test,
    sparseness_product,
)

__version__ = "0.1.0"

__all__ = [
    "AnchorUnsuitable",
    "Annulus",
    "CanonicalProduct",
    "ContourError",
    "CounterexampleBundle",
    "DomainError",
    "GridFunction",
    "InsufficientSparseness",
    "LacunaryError",
    "MeromorphicSum",
    "PeakInput",
    "PoleError",
    "PrecisionWarning",
    "RankOneData",
    "SearchFailure",
    "SpectrumSequence",
    "UnsupportedInput",
    "ZeroSet",
    "beta_eval",
    "beta_zeros",
    "block_product",
    "bon_witness",
    "build_counterexample",
    "build_truncated_matrix",
    "check_lacunary",
    "counting_function",
    "defect_rank",
    "degeneracy_check",
    "divided_interval",
    "greedy_block",
    "interpolation_residual",
    "kernel_chain_dims",
    "lacunary_lower_bound_probe",
    "limst_probe",
    "log2_density_test",
    "moment_equalities_check",
    "moment_sum",
    "polya_peaks",
    "psi_eval",
    "resolvent_norm_probe",
    "sector_localization_check",
    "singular_to_bounded",
    "sparseness_product",
    "spectrum_from_beta",
    "verify_sums",
    "zero_free_radii",
]
