"""KL_inf-UCB bandits over nonparametric reward classes, with tools to
measure the tail of the pull-count distribution and compare it against
theoretical exponents."""

from .constants import (
    RatioResult,
    bernoulli_ratio,
    discrimination_ratio,
    is_discrimination_equivalent,
    lai_robbins_constant,
    tail_exponent_theory,
    theorem3_exponent,
)
from .dist import (
    BanditInstance,
    BoundedSupport,
    EmpiricalDist,
    FiniteAlphabet,
    FiniteDist,
    MomentBounded,
    kl,
    mean,
    parse_class,
    record,
    sample,
)
from .klinf import KlinfResult, klinf, klinf_bounded, klinf_finite, klinf_moment, klinf_oracle
from .policy import (
    FiniteSupportSchedule,
    PolicyState,
    Theorem1Schedule,
    index,
    parse_schedule,
    select_arm,
    threshold,
    update,
)
from .sim import BatchResult, RunRecord, run_batch, run_episode
from .tails import deviation_grid, tail_curve, tail_exponent

__version__ = "0.1.0"
