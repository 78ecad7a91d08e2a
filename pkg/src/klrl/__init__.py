"""Fine-tuning objectives over exactly enumerable sequence spaces.

Pure RL, KL-regularised RL, forward-KL distributional control (GDC) and MLE
on tabular autoregressive policies, checked against an exact Gibbs-posterior
oracle.
"""
from .objectives import (
    GradientEstimate,
    ObjectiveSpec,
    grad_gdc,
    grad_klrl,
    grad_mle,
    grad_pure_rl,
    reshaped_reward,
)
from .oracle import (
    IdentityReport,
    TargetDistribution,
    elbo,
    entropy,
    expected_reward,
    gibbs_posterior,
    kl,
    klrl_objective_exact,
    partition_function,
    verify_identities,
)
from .policy import TabularPolicy, from_distribution, init_prior, load_policy
from .reward import (
    Composite,
    ContainsSubstring,
    LengthPenalty,
    OptimalityModel,
    TableReward,
    TokenCount,
    argmax_set,
    reward_from_json,
)
from .seqspace import SequenceSpace, Vocab, make_space
from .trainer import TrainConfig, Trajectory, beta_sweep, collapse_report, train

__version__ = "0.1.0"
