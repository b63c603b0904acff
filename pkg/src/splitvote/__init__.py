"""Certified feature robustness for voting ensembles on partitioned features.

Train an ensemble whose submodels each see a disjoint (or phi-overlapping)
slice of the feature dimensions; any perturbed feature, whether changed in
training rows, the test point, or both, can then corrupt only the submodels
that own it.  Counting votes with deterministic tie-breaking turns that
containment into pointwise certificates against sparse evasion, poisoning,
and backdoor attacks, with exhaustive small-scale adversaries available to
validate every certificate.
"""

from .certify import (
    Certificate,
    DpTable,
    certify_plurality,
    certify_runoff,
    certify_topk,
    dp,
    gap_logit,
    gap_vote,
    tag_label_flip,
)
from .ensemble import (
    Ensemble,
    LogitProfile,
    VoteProfile,
    load_ensemble,
    logit_profile,
    predict_plurality,
    predict_runoff,
    regression_votes,
    save_ensemble,
    train_ensemble,
    vote_profile,
)
from .errors import (
    CapacityError,
    DataError,
    InvalidArgumentError,
    InvalidConfigurationError,
    InvalidUpgradeError,
    SplitVoteError,
    TrainingError,
)
from .learners import SubmodelSpec, TrainedSubmodel, submodel_logits, train_submodel
from .overlap import OverlapProfile, certify_overlap, overlap_multiset
from .partition import (
    FeaturePartition,
    SpreadMap,
    load_partition,
    overlapping_partition,
    random_partition,
    save_partition,
    spread_assignment,
    strided_partition,
)
from .regression import (
    IntervalSpec,
    binarize,
    certify_interval,
    certify_lower,
    certify_upper,
    median_decision,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
