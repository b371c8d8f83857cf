"""
Lockset and proposal validity rules
"""
from typing import Protocol

from app.protocol.models import (
    Lockset,
    Mutation,
    ProposalMessage,
    ProtocolConfig,
    RejectionReason,
    Value,
    VoteMessage,
)


class GenuinenessOracle(Protocol):
    """
    Stand-in for signature verification: answers whether a vote was really
    emitted by its claimed sender.
    """

    def is_genuine(self, vote: VoteMessage) -> bool:
        ...


def leader_of(round: int, n: int) -> int:
    """Round-robin leader; node 0 leads round 1."""
    return (round - 1) % n


def is_valid_lockset(ls: Lockset, expected_round: int, cfg: ProtocolConfig) -> bool:
    """
    A lockset is valid when it holds at least 4f+1 votes of `expected_round`
    from distinct senders.
    """
    if ls.round != expected_round:
        return False
    senders = set()
    for key, vote in ls.votes.items():
        if vote.round != expected_round or vote.sender != key:
            return False
        if not 0 <= vote.sender < cfg.n:
            return False
        senders.add(vote.sender)
    return len(senders) >= cfg.q_hi


def qualifying_values(ls: Lockset, cfg: ProtocolConfig) -> list[Value]:
    """
    Non-empty values with at least 2f+1 supporting votes, smallest first.
    """
    return sorted(
        (value for value, count in ls.support().items()
         if not value.is_empty and count >= cfg.q_lo),
        key=Value.sort_key,
    )


def choose_proposal_value(ls: Lockset, own_initial: Value, cfg: ProtocolConfig) -> Value:
    """
    Pick the value an honest leader must propose over `ls`.

    Args:
        ls: Valid lockset of the previous round
        own_initial: The leader's initial value
        cfg: Protocol configuration

    Returns:
        The smallest qualifying value, or `own_initial` when none qualifies
    """
    if cfg.mutation == Mutation.NO_PROPOSAL_CONSTRAINT:
        return own_initial
    candidates = qualifying_values(ls, cfg)
    return candidates[0] if candidates else own_initial


def validate_proposal(
    p: ProposalMessage,
    cfg: ProtocolConfig,
    genuine: GenuinenessOracle,
) -> RejectionReason | None:
    """
    Check a proposal against every validity clause.

    Args:
        p: Received proposal
        cfg: Protocol configuration
        genuine: Oracle vouching for embedded votes

    Returns:
        None when the proposal is valid, otherwise the first failing clause
    """
    if p.sender != leader_of(p.round, cfg.n):
        return RejectionReason.WRONG_LEADER
    if p.value.is_empty:
        return RejectionReason.EMPTY_VALUE

    if p.round == 1:
        if p.justification.votes:
            return RejectionReason.INVALID_LOCKSET
        return None

    if not is_valid_lockset(p.justification, p.round - 1, cfg):
        return RejectionReason.INVALID_LOCKSET
    if not all(genuine.is_genuine(v) for v in p.justification.votes.values()):
        return RejectionReason.FORGED_VOTE

    if cfg.mutation != Mutation.NO_PROPOSAL_CONSTRAINT:
        candidates = qualifying_values(p.justification, cfg)
        if candidates and p.value not in candidates:
            return RejectionReason.CONSTRAINT_VIOLATED
    return None
