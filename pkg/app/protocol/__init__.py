"""Protocol package initialization"""

from .models import (
    EMPTY,
    Lockset,
    Mutation,
    NodeOutput,
    NodeState,
    ProposalMessage,
    ProtocolConfig,
    RejectionReason,
    TimerKind,
    Value,
    VoteMessage,
)
from .validation import (
    GenuinenessOracle,
    choose_proposal_value,
    is_valid_lockset,
    leader_of,
    validate_proposal,
)
from .replica import (
    advance_round,
    initial_state,
    make_proposal,
    on_proposal,
    on_round_start,
    on_vote_timeout,
    record_vote,
    step,
    try_commit,
)

__all__ = [
    "EMPTY",
    "Lockset",
    "Mutation",
    "NodeOutput",
    "NodeState",
    "ProposalMessage",
    "ProtocolConfig",
    "RejectionReason",
    "TimerKind",
    "Value",
    "VoteMessage",
    "GenuinenessOracle",
    "choose_proposal_value",
    "is_valid_lockset",
    "leader_of",
    "validate_proposal",
    "advance_round",
    "initial_state",
    "make_proposal",
    "on_proposal",
    "on_round_start",
    "on_vote_timeout",
    "record_vote",
    "step",
    "try_commit",
]
