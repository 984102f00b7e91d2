"""Bidirectional-looking optimizers with desk-scale benchmarks and metrics."""

from ._kernels import BACKEND, PURE_NUMPY
from .core import (
    AblationFlags,
    BoxConstraint,
    HyperParams,
    LrSchedule,
    RunTrace,
    StepRecord,
    ValidationReport,
    lr_at,
    project,
    validate_hyperparams,
)
from .dema import DemaCoeffs, DemaState, dema_coeffs, dema_step, steady_state_gain
from .lookahead import EtaSchedule, LookaheadState, eta_at, maybe_sync
from .metrics import (
    RateReport,
    RegretReport,
    first_hit_time,
    grad_check,
    min_grad_norm_series,
    regret,
)
from .optimizers import (
    AdamState,
    AdmetaRState,
    AdmetaSState,
    Optimizer,
    RadamState,
    SgdmState,
    adam_step,
    admetar_step,
    admetas_step,
    make_optimizer,
    radam_step,
    rectification,
    rho_at,
    sgd_step,
    sgdm_step,
    step,
)
from .presets import PRESETS, get_preset
from .problems import (
    OnlineQuadraticStream,
    QuadraticValley,
    Rosenbrock,
    TinyMlp,
    gen_synthetic_dataset,
    make_problem,
)
from .runner import RunConfig, compare_ablations, demo_ema_vs_dema, execute_run

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
