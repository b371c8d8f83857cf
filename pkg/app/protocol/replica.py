"""
Replica transition function

Implements the propose step and the vote step as pure functions over
NodeState. Time only enters through timeout events; every function returns
a new state together with the NodeOutput the driver has to act on.
"""
import logging

from app.protocol.models import (
    EMPTY,
    CommitTimeout,
    Mutation,
    NodeEvent,
    NodeOutput,
    NodeState,
    ProposalMessage,
    ProposalReceived,
    ProposalRejection,
    ProtocolConfig,
    RoundStart,
    TimerKind,
    TimerRequest,
    Value,
    VoteMessage,
    VoteReceived,
    VoteTimeout,
)
from app.protocol.validation import (
    GenuinenessOracle,
    choose_proposal_value,
    is_valid_lockset,
    leader_of,
    validate_proposal,
)

logger = logging.getLogger(__name__)


def initial_state(node_id: int, initial_value: Value, cfg: ProtocolConfig) -> NodeState:
    """Build the round-1 state of a node; the driver still has to deliver RoundStart(1)."""
    if initial_value.is_empty:
        raise ValueError(f"Node {node_id}: initial value must not be empty")
    return NodeState(
        id=node_id,
        initial_value=initial_value,
        current_round=1,
        to_vote=cfg.to_vote(1),
        to_commit=cfg.to_commit(1),
    )


def make_proposal(state: NodeState, cfg: ProtocolConfig) -> ProposalMessage | None:
    """
    Build the leader's proposal for the current round.

    Returns:
        The proposal, or None when round > 1 and no valid lockset of the
        previous round is stored (no proposal this round)
    """
    r = state.current_round
    if r == 1:
        return ProposalMessage(round=1, value=state.initial_value, sender=state.id)

    previous = state.locksets.get(r - 1)
    if previous is None or not is_valid_lockset(previous, r - 1, cfg):
        return None
    value = choose_proposal_value(previous, state.initial_value, cfg)
    return ProposalMessage(round=r, value=value, sender=state.id, justification=previous)


def on_round_start(state: NodeState, cfg: ProtocolConfig) -> tuple[NodeState, NodeOutput]:
    """Reset the per-round vote flag, propose if leading and arm both timers."""
    r = state.current_round
    state = state.model_copy(update={"voted_this_round": False})
    output = NodeOutput(
        entered_round=r,
        timers=[
            TimerRequest(kind=TimerKind.VOTE, round=r, duration=state.to_vote),
            TimerRequest(kind=TimerKind.COMMIT, round=r, duration=state.to_commit),
        ],
    )
    if state.id == leader_of(r, cfg.n):
        proposal = make_proposal(state, cfg)
        if proposal is not None:
            output.outgoing.insert(0, proposal)
    return state, output


def on_proposal(
    state: NodeState,
    p: ProposalMessage,
    cfg: ProtocolConfig,
    genuine: GenuinenessOracle,
) -> tuple[NodeState, NodeOutput]:
    """Vote for a valid proposal of the current round, at most once."""
    if p.round > state.current_round:
        buffered = state.pending_proposals.get(p.round, ()) + (p,)
        pending = {**state.pending_proposals, p.round: buffered}
        return state.model_copy(update={"pending_proposals": pending}), NodeOutput()
    if p.round < state.current_round:
        return state, NodeOutput()

    reason = validate_proposal(p, cfg, genuine)
    if reason is not None:
        logger.debug(f"Node {state.id} rejected round {p.round} proposal from {p.sender}: {reason.value}")
        rejection = ProposalRejection(round=p.round, sender=p.sender, reason=reason)
        return state, NodeOutput(rejections=[rejection])
    if state.voted_this_round:
        return state, NodeOutput()
    return _cast_vote(state, p.value, cfg)


def on_vote_timeout(state: NodeState, cfg: ProtocolConfig, round: int | None = None) -> tuple[NodeState, NodeOutput]:
    """Vote without a proposal: ∅ in round 1, otherwise repeat the previous round's vote."""
    r = state.current_round
    if (round is not None and round != r) or state.voted_this_round:
        return state, NodeOutput()

    if r == 1:
        value = EMPTY
    elif cfg.mutation == Mutation.REVOTE_INITIAL_AFTER_COMMIT and state.committed is not None:
        value = state.initial_value
    else:
        value = state.last_vote_value or EMPTY
    return _cast_vote(state, value, cfg)


def record_vote(state: NodeState, v: VoteMessage) -> NodeState:
    """
    Store a received vote; the first vote per (sender, round) wins.

    Votes older than current_round - 1 are dropped unless they belong to the
    commit round.
    """
    if v.round < state.current_round - 1 and v.round != state.commit_round:
        return state
    ls = state.lockset(v.round)
    updated = ls.with_vote(v)
    if updated is ls and v.round in state.locksets:
        return state
    return state.model_copy(update={"locksets": {**state.locksets, v.round: updated}})


def try_commit(state: NodeState, cfg: ProtocolConfig) -> Value | None:
    """
    Return the value with a commit quorum of current-round votes, if any.

    With the real 4f+1 quorum at most one value can qualify; the smallest is
    taken otherwise so weakened builds stay deterministic.
    """
    if state.committed is not None:
        return None
    ls = state.locksets.get(state.current_round)
    if ls is None:
        return None
    winners = [
        value for value, count in ls.support().items()
        if not value.is_empty and count >= cfg.commit_quorum
    ]
    if not winners:
        return None
    return min(winners, key=Value.sort_key)


def on_vote(state: NodeState, v: VoteMessage, cfg: ProtocolConfig) -> tuple[NodeState, NodeOutput]:
    state = record_vote(state, v)
    output = NodeOutput()
    if v.round == state.current_round:
        state, output = _commit_if_possible(state, cfg, output)
    return state, output


def advance_round(
    state: NodeState,
    cfg: ProtocolConfig,
    genuine: GenuinenessOracle,
) -> tuple[NodeState, NodeOutput]:
    """
    Move to the next round with doubled timeouts and re-run round start.

    Committed nodes advance too, so they keep voting for later rounds.
    """
    r = state.current_round + 1
    kept = {
        rr: ls for rr, ls in state.locksets.items()
        if rr >= r - 1 or rr == state.commit_round
    }
    state = state.model_copy(update={
        "current_round": r,
        "to_vote": cfg.to_vote(r),
        "to_commit": cfg.to_commit(r),
        "voted_this_round": False,
        "locksets": kept,
    })
    state, output = _enter_round(state, cfg, genuine)
    output.round_advanced = True
    return state, output


def on_commit_timeout(
    state: NodeState,
    cfg: ProtocolConfig,
    round: int,
    genuine: GenuinenessOracle,
) -> tuple[NodeState, NodeOutput]:
    if round != state.current_round:
        return state, NodeOutput()
    return advance_round(state, cfg, genuine)


def step(
    state: NodeState,
    event: NodeEvent,
    cfg: ProtocolConfig,
    genuine: GenuinenessOracle,
) -> tuple[NodeState, NodeOutput]:
    """
    Apply one event to a node.

    Args:
        state: Current node state
        event: RoundStart, ProposalReceived, VoteReceived, VoteTimeout or CommitTimeout
        cfg: Protocol configuration
        genuine: Oracle used to validate lockset votes

    Returns:
        The new state and the driver-facing output
    """
    if isinstance(event, RoundStart):
        if event.round != state.current_round:
            return state, NodeOutput()
        return _enter_round(state, cfg, genuine)
    if isinstance(event, ProposalReceived):
        return on_proposal(state, event.proposal, cfg, genuine)
    if isinstance(event, VoteReceived):
        return on_vote(state, event.vote, cfg)
    if isinstance(event, VoteTimeout):
        return on_vote_timeout(state, cfg, event.round)
    if isinstance(event, CommitTimeout):
        return on_commit_timeout(state, cfg, event.round, genuine)
    raise TypeError(f"Unsupported node event: {event!r}")


def _enter_round(
    state: NodeState,
    cfg: ProtocolConfig,
    genuine: GenuinenessOracle,
) -> tuple[NodeState, NodeOutput]:
    state, output = on_round_start(state, cfg)

    r = state.current_round
    buffered = state.pending_proposals.get(r, ())
    pending = {rr: ps for rr, ps in state.pending_proposals.items() if rr > r}
    state = state.model_copy(update={"pending_proposals": pending})
    for proposal in buffered:
        state, out = on_proposal(state, proposal, cfg, genuine)
        output = output.merge(out)

    # votes of this round may have arrived before the node entered it
    return _commit_if_possible(state, cfg, output)


def _cast_vote(state: NodeState, value: Value, cfg: ProtocolConfig) -> tuple[NodeState, NodeOutput]:
    vote = VoteMessage(round=state.current_round, value=value, sender=state.id)
    state = state.model_copy(update={"voted_this_round": True, "last_vote_value": value})
    state = record_vote(state, vote)
    return _commit_if_possible(state, cfg, NodeOutput(outgoing=[vote]))


def _commit_if_possible(
    state: NodeState,
    cfg: ProtocolConfig,
    output: NodeOutput,
) -> tuple[NodeState, NodeOutput]:
    value = try_commit(state, cfg)
    if value is None:
        return state, output
    logger.debug(f"Node {state.id} committed {value} in round {state.current_round}")
    state = state.model_copy(update={"committed": value, "commit_round": state.current_round})
    output.committed_now = value
    return state, output
