"""Budget-aware multi-fidelity Bayesian optimization with a persistent task queue."""

from .acquisition import CandidateTask, expected_improvement, propose_batch, variance_reduction_benefit
from .allocator import BudgetState, SelectionDecision, plan_iteration, select_tasks, update_budgets
from .bench import BenchmarkProblem, get_benchmark, problem_from_dict
from .config import load_config, validate_file
from .domain import CostModel, DesignPoint, Domain, FidelityLevel, Observation, TrustPrior, lhs_design
from .driver import CampaignConfig, CampaignReport, resume_campaign, run_campaign
from .errors import (
    ConfigurationError,
    DomainViolation,
    IllConditioned,
    IntegrityError,
    InvalidArgument,
    MfloopError,
    MissingData,
    NoCandidates,
    StateViolation,
)
from .gp import KernelParams, fit_gp, gp_predict
from .mf import Bridge, MfSurrogate, fit_bridge, fit_mf, mf_predict, trust_variance
from .orchestrator import Broker, ResultStore, Task, WorkerProfile

__version__ = "0.1.0"
