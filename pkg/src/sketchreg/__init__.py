"""sketchreg: oblivious linear sketches for k-sparse regression.

Sketch once, then estimate ell_p / ReLU / hinge-like losses of k-sparse
candidates from the sketch alone; recover near-optimal k-sparse vectors
from a pair of CountSketches; solve sketched LASSO.  See the bench module
for the reproducible experiments behind the pinned constants.
"""

from .numerics import (
    RngStream,
    StableParams,
    calibrate_stable_scale,
    sample_gaussian_matrix,
    sample_stable,
)
from .sketches import (
    CompositeSketch,
    CountSketchState,
    GaussianSketch,
    IdentitySketch,
    OnesRowSketch,
    RowSampler,
    StableSketch,
    apply,
    build_countsketch,
    build_gaussian_sketch,
    build_hinge_sketch,
    build_relu_sketch,
    build_row_sampler,
    build_stable_sketch,
    densify,
    next_prime,
    point_query,
    sketch_from_json,
    sketch_to_json,
)
from .losses import (
    HingeLikeLoss,
    MuCertificate,
    certify_mu,
    f_norm,
    lp_norm,
    median_norm,
    relu_norm,
)
from .estimators import (
    SketchedInstance,
    estimate_hinge,
    estimate_l2,
    estimate_med,
    estimate_relu,
    make_sketched_instance,
    sparse_recover,
)
from .solvers import (
    ProblemTooLarge,
    SolveResult,
    SparseVector,
    brute_force_sparse_l2,
    brute_force_sparse_lp,
    lasso_sketched_solve,
    lasso_solve,
    sketched_sparse_min,
)
from .instances import (
    ConstructionFailed,
    FamilyReport,
    RegressionInstance,
    SupportFamily,
    build_support_family,
    eval_planted_loss,
    gen_mu_instance,
    gen_planted_regression,
    gen_powerlaw_signal,
    gen_sampling_failure_instance,
    gen_spiked_instance,
    instance_from_json,
    instance_to_json,
    verify_family,
)
from .config import ExperimentConfig, SketchConstants, default_config
from .bench import ExperimentReport, emit_report, run_experiment

__version__ = "0.1.0"
