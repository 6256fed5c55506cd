"""psdlift: rank-1 recovery from inner products with PSD matrices.

Layers, bottom up:

- ``symcore`` — symmetric-matrix algebra and rank-1 tangent geometry;
- ``zonal`` — partitions and explicit zonal polynomials (degrees 1..3);
- ``moments`` — analytic trace/cross moments of the orbit measure and
  the derived expectation operators;
- ``cubature`` — orbit sampling, strength verification, moment-matched
  cubature construction, ensemble files;
- ``recover`` — measurement sets, alternating-projection feasibility,
  isometry constants, dual certificates via the staged golfing scheme;
- ``cli`` — the ``psdlift`` command.

Hot kernels run through numba when available; set
``PSDLIFT_BACKEND=numpy`` to force the pure-numpy fallback (see
``_backend``).
"""

from ._backend import BACKEND, warmup
from ._seeding import derive_seed, rng_for, splitmix64
from .symcore import (
    SymMatrix,
    Spectrum,
    TangentAnchor,
    fro_norm,
    hs_basis,
    hs_inner,
    identity,
    operator_norm,
    power_sums,
    psd_project,
    rank1,
    spectral_decompose,
    tangent_basis,
    tangent_complement,
    tangent_decompose,
    tangent_project,
)
from .zonal import Partition, partitions, zonal_eval, zonal_eval_sums
from .moments import (
    MomentCoefficients,
    coefficient_moment,
    cross_moment,
    dirichlet_moment,
    expectation_operator,
    moment_bound,
    rank1_general_moment,
    rank1_projector_moment,
    s_map,
    second_order_operator,
    trace_moment,
)
from .cubature import (
    CubatureResidualError,
    VerificationReport,
    WeightedEnsemble,
    construct_cubature,
    draw_iid,
    draw_iid_stack,
    haar_batch,
    haar_orthogonal,
    haar_sample,
    load_ensemble,
    pol_dim_bounds,
    save_ensemble,
    uniform_haar_ensemble,
    verify_strength,
    verify_tight_fusion,
)
from .recover import (
    CertificateCheck,
    CertificateReport,
    GolfingParams,
    GolfingStageError,
    InfeasibleError,
    IsometryConstants,
    MeasurementSet,
    RecoveryResult,
    check_certificate,
    deterministic_guarantee,
    golfing_certificate,
    golfing_depth,
    isometry_constants,
    load_measurements,
    measure,
    r_operator,
    save_measurements,
    solve_feasibility,
    truncated_r,
)

__version__ = "0.1.0"
