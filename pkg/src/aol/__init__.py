"""Analysis operator learning for cosparse signal models."""

from .operators import (
    AnalysisOperator,
    NullSpaceBasis,
    SignalMatrix,
    objective_l1,
    project_tf,
    project_tf_perp_null,
    project_un,
    subgradient,
    untf_project,
)
from .learning import (
    LearnConfig,
    LearnState,
    aola,
    operator_update,
    signal_update,
    soft_threshold,
)
from .datagen import perturb_operator, random_untf, sample_cosparse
from .identifiability import (
    build_psi,
    check_lemma1,
    check_lemma2,
    check_lemma3,
    check_theorem1,
    identifiability_fraction,
    sample_kernel,
    tangent_basis,
)
from .imaging import (
    GrayImage,
    PatchSet,
    cosparsity,
    denoise_patches,
    extract_patches,
    fd_operator,
    haar_operator,
    psnr,
    reconstruct_overlap,
    row_recovery_rate,
    shepp_logan,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
