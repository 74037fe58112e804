"""Polychoric (latent linear) correlation from fuzzy frequency tables."""

from .counting import (
    FORMAT,
    FuzzyCount,
    FuzzyFrequencyTable,
    build_table,
    counting_functions,
    defuzzify,
    fuzzy_count,
    joint_inclusion,
)
from .dataset import DatasetFile, SchemaError
from .errors import (
    AllZeroMembership,
    DegenerateConditional,
    DomainError,
    EmptyMarginal,
    EmptySample,
    EstimationFailed,
    FuzzcorError,
    InvalidFuzzyNumber,
    LengthMismatch,
    PartitionInvalid,
    SingularInformation,
)
from .estimation import (
    METHODS,
    CorrelationMatrix,
    FitOptions,
    FitResult,
    assemble_matrix,
    conditional_density,
    e_step,
    fit,
    fit_dml,
    fit_fem,
    smooth_correlation,
    standard_error,
)
from .fuzzy import (
    FuzzyNumber,
    FuzzyPartition,
    cardinality,
    inclusion_degree,
    membership,
    sample_range,
    validate_partition,
)
from .latent import LlcParams, bivariate_normal_rect, cell_prob_drho, cell_probabilities
from .simulation import SimCondition, SimReport, generate_table, run_study

__version__ = "0.1.0"
