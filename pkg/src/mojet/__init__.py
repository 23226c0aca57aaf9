"""Jet-based diagnostics for modular prediction pipelines.

Estimate local linear response maps (jets) of tapped pipeline modules under
structured input perturbations, then compare models through the numerical
rank of those maps and the principal-angle similarity of their dominant
input subspaces.
"""

from ._version import __version__
from .data import (
    gen_latent_regression,
    gen_linreg,
    gen_mixture_classification,
    gen_synthetic_digits,
    load_digits,
    stratified_split_indices,
    write_digits_csv,
)
from .diagnostics import (
    CostCounters,
    DiagnosticsReport,
    FixedDimension,
    JetSimResult,
    RankResult,
    RelativeThreshold,
    aggregate,
    jet_sim,
    numerical_rank,
    row_space_basis,
    select_k_variance,
)
from .errors import (
    ConfigError,
    DataFileError,
    DegenerateSpectrumError,
    MojetError,
    NotLinearError,
    NumericError,
    ShapeError,
    SingularSystemError,
    UndefinedSimilarityError,
    UnidentifiableError,
    ValidationError,
)
from .experiments import (
    ExperimentConfig,
    ExperimentReport,
    default_config,
    run_experiment,
    strip_timing_fields,
)
from .identifiability import (
    LinearFactorization,
    MirageMember,
    RecoveredFactorization,
    corollary_check,
    make_mirage_member,
    mirage_family,
    recover_factorization,
)
from .jets import (
    FixedRidge,
    Jet,
    ScaleAwareRidge,
    ZeroRidge,
    estimate_jet,
    estimate_jets_over_bases,
    resolve_ridge,
)
from .numerics import (
    RngStream,
    STREAM_BASES,
    STREAM_DATA,
    STREAM_INIT,
    STREAM_PROBES,
    Svd,
    gaussian,
    solve_spd,
    svd,
)
from .pipeline import (
    Activation,
    Identity,
    Linear,
    LogisticHead,
    PcaProject,
    Pipeline,
    Standardize,
    TapRecord,
    compose_two_module_linear,
)
from .probes import (
    ExplicitBasis,
    Isotropic,
    ProbeBatch,
    SubspaceAligned,
    check_full_column_rank,
    sample_probes,
)
from .training import (
    Dataset,
    TrainConfig,
    TrainResult,
    apply_standardizer,
    classification_error,
    fit_logistic,
    fit_ols,
    fit_pca,
    fit_standardizer,
    regression_mse,
    train_mlp,
)
