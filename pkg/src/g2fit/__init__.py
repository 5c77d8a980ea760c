"""Few-photon reconstruction of second-order photon correlation histograms.

Poisson maximum-likelihood / L1-regularised MAP fits of physically
motivated G2(tau) ansatzes, Powell multi-start optimisation, and Poisson
forward simulation of longer acquisitions.
"""

from ._accel import backend
from .errors import (AlignmentError, BracketError, ConfigurationError, FormatError, G2FitError, LayoutError,
                     NormalizationError, TruncationError, ValidationError)
from .fixtures import Fixture, load_fixture
from .metrics import (CRBReport, EnsembleBenchmark, MetricsReport, center_peak_ratio, crb_empirical_check,
                      integration_time_ladder, metrics_report, nrmse, run_ensemble_benchmark)
from .models import (DelayGrid, ModelSpec, ParamSpec, PulsedEmitterParams, PulsedEmitterSpec, ThermalSumParams,
                     ThermalSumSpec, default_truncation, eval_pulsed, eval_thermal, evaluate, pulsed_model,
                     thermal_model)
from .objectives import (Histogram, Objective, ObjectiveConfig, ObjectiveKind, laplace_logprior, loglik_grad_y,
                         lsq_objective, map_objective, poisson_loglik)
from .optim import (FitResult, MultiStartPlan, OptimizerSettings, brent_line_min, levenberg_marquardt,
                    multistart_lsq, multistart_maximize, powell_minimize)
from .sampler import SamplerConfig, generate_synthetic, sample_poisson, scale_signal

__version__ = "0.1.0"
