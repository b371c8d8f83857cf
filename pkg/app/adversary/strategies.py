"""
Byzantine node strategies

Each strategy rewrites the messages a faulty node's honest state machine
wants to send. Strategies may drop, alter or add messages and may target
recipients individually, but they can only sign votes under faulty ids.
"""
import logging
from itertools import islice
from typing import Protocol

from pydantic import BaseModel, ConfigDict, Field

from app.adversary.models import (
    CrashStrategy,
    EquivocateVotesStrategy,
    FabricatedLocksetStrategy,
    FabricatedValueStrategy,
    InvalidProposalStrategy,
    InvalidProposalVariant,
    MuteLeaderStrategy,
    NodeStrategy,
)
from app.protocol.models import (
    EMPTY,
    Lockset,
    Message,
    NodeOutput,
    NodeState,
    ProposalMessage,
    ProtocolConfig,
    Value,
    VoteMessage,
)
from app.protocol.validation import is_valid_lockset, leader_of, qualifying_values
from app.sim.registry import GenuinenessRegistry

logger = logging.getLogger(__name__)


class UnforgeableViolation(RuntimeError):
    """A faulty node tried to send a vote under a non-faulty id that was never signed."""


class Outbound(BaseModel):
    """One message together with the nodes it is sent to."""
    model_config = ConfigDict(frozen=True)

    message: Message
    recipients: tuple[int, ...] = Field(description="Recipient ids, ascending")


class AdversaryContext(BaseModel):
    """What a strategy may look at when rewriting a node's output."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    node: int
    time: int
    state: NodeState
    cfg: ProtocolConfig
    faulty: frozenset[int]
    registry: GenuinenessRegistry

    @property
    def n(self) -> int:
        return self.cfg.n

    @property
    def everyone(self) -> tuple[int, ...]:
        return tuple(range(self.cfg.n))


def broadcast(messages: list[Message], n: int) -> list[Outbound]:
    everyone = tuple(range(n))
    return [Outbound(message=m, recipients=everyone) for m in messages]


def leading_round(output: NodeOutput, ctx: AdversaryContext) -> int | None:
    """Round the node just entered as leader, or None."""
    r = output.entered_round
    if r is not None and leader_of(r, ctx.n) == ctx.node:
        return r
    return None


class StrategyHandler(Protocol):
    """
    Protocol implemented by every strategy handler.
    """
    kind: str

    def apply(
        self,
        strategy: NodeStrategy,
        outbound: list[Outbound],
        output: NodeOutput,
        ctx: AdversaryContext,
    ) -> list[Outbound]:
        """
        Rewrite the node's outbound messages.

        Args:
            strategy: Strategy parameters from the scenario
            outbound: Messages the honest state machine would broadcast
            output: Raw transition output, for round entry and commits
            ctx: Node, time, state and registry

        Returns:
            Messages to actually send
        """
        ...

    def is_silenced(self, strategy: NodeStrategy, time: int) -> bool:
        ...


class _BaseHandler:
    kind = ""

    def is_silenced(self, strategy: NodeStrategy, time: int) -> bool:
        return False


class CrashHandler(_BaseHandler):
    kind = "crash"

    def apply(self, strategy: CrashStrategy, outbound, output, ctx):
        if self.is_silenced(strategy, ctx.time):
            return []
        return outbound

    def is_silenced(self, strategy: CrashStrategy, time: int) -> bool:
        return time >= strategy.from_time


class MuteLeaderHandler(_BaseHandler):
    kind = "mute_leader"

    def apply(self, strategy: MuteLeaderStrategy, outbound, output, ctx):
        return [o for o in outbound if o.message.kind != "proposal"]


class EquivocateVotesHandler(_BaseHandler):
    """
    Sends value X to ids below the split and Y to the others. Y is the
    node's initial value, or Empty when X already is the initial value.
    """
    kind = "equivocate_votes"

    def apply(self, strategy: EquivocateVotesStrategy, outbound, output, ctx):
        split = strategy.split if strategy.split is not None else ctx.n // 2
        low = tuple(range(0, min(split, ctx.n)))
        high = tuple(range(min(split, ctx.n), ctx.n))

        result = []
        for item in outbound:
            vote = item.message
            if vote.kind != "vote":
                result.append(item)
                continue
            other = ctx.state.initial_value if vote.value != ctx.state.initial_value else EMPTY
            if low:
                result.append(Outbound(message=vote, recipients=low))
            if high:
                twin = vote.model_copy(update={"value": other})
                result.append(Outbound(message=twin, recipients=high))
        return result


class InvalidProposalHandler(_BaseHandler):
    """Replaces the leader's proposal with one that fails a single validity clause."""
    kind = "invalid_proposal"

    def apply(self, strategy: InvalidProposalStrategy, outbound, output, ctx):
        r = leading_round(output, ctx)
        if r is None:
            return outbound
        kept = [o for o in outbound if o.message.kind != "proposal"]
        proposal = self._build(strategy.variant, r, ctx)
        if proposal is not None:
            kept.insert(0, Outbound(message=proposal, recipients=ctx.everyone))
        return kept

    def _build(self, variant: InvalidProposalVariant, r: int, ctx: AdversaryContext) -> ProposalMessage | None:
        state, cfg = ctx.state, ctx.cfg
        if variant == InvalidProposalVariant.EMPTY_VALUE:
            if r == 1:
                return ProposalMessage(round=1, value=EMPTY, sender=ctx.node)
            previous = state.lockset(r - 1)
            if not is_valid_lockset(previous, r - 1, cfg):
                return None
            return ProposalMessage(round=r, value=EMPTY, sender=ctx.node, justification=previous)

        if r == 1:
            return None
        previous = state.lockset(r - 1)

        if variant == InvalidProposalVariant.SHORT_LOCKSET:
            short = Lockset(round=r - 1, votes=dict(islice(previous.votes.items(), cfg.q_hi - 1)))
            candidates = qualifying_values(short, cfg)
            value = candidates[0] if candidates else state.initial_value
            return ProposalMessage(round=r, value=value, sender=ctx.node, justification=short)

        # constraint violation
        if not is_valid_lockset(previous, r - 1, cfg):
            return None
        candidates = qualifying_values(previous, cfg)
        if not candidates:
            return None
        value = state.initial_value
        if value in candidates:
            value = Value(payload=f"{value.payload}~")
        return ProposalMessage(round=r, value=value, sender=ctx.node, justification=previous)


class FabricatedLocksetHandler(_BaseHandler):
    """
    Builds its own lockset from the genuine votes of non-faulty nodes plus a
    fabricated vote for the attack value from every faulty node.
    """
    kind = "fabricated_lockset"

    def apply(self, strategy: FabricatedLocksetStrategy, outbound, output, ctx):
        r = leading_round(output, ctx)
        if r is None or r == 1:
            return outbound
        attack = Value(payload=strategy.attack_value) if strategy.attack_value else ctx.state.initial_value

        previous = ctx.state.lockset(r - 1)
        votes = {s: v for s, v in previous.votes.items() if s not in ctx.faulty}
        for sender in sorted(ctx.faulty):
            votes[sender] = VoteMessage(round=r - 1, value=attack, sender=sender)
        forged = Lockset(round=r - 1, votes=votes)

        kept = [o for o in outbound if o.message.kind != "proposal"]
        if len(forged) < ctx.cfg.q_hi:
            return kept

        candidates = qualifying_values(forged, ctx.cfg)
        value = attack if not candidates or attack in candidates else candidates[-1]
        proposal = ProposalMessage(round=r, value=value, sender=ctx.node, justification=forged)
        kept.insert(0, Outbound(message=proposal, recipients=ctx.everyone))
        return kept


class FabricatedValueHandler(_BaseHandler):
    kind = "fabricated_value"

    def apply(self, strategy: FabricatedValueStrategy, outbound, output, ctx):
        r = leading_round(output, ctx)
        if r is None:
            return outbound
        result = []
        for item in outbound:
            proposal = item.message
            if proposal.kind == "proposal" and (
                r == 1 or not qualifying_values(proposal.justification, ctx.cfg)
            ):
                item = Outbound(
                    message=proposal.model_copy(update={"value": Value(payload=strategy.value)}),
                    recipients=item.recipients,
                )
            result.append(item)
        return result


class StrategyRegistry:
    """
    Registry for managing all available Byzantine strategies.
    """

    def __init__(self):
        self._handlers: dict[str, type[StrategyHandler]] = {}
        self._register_default_strategies()

    def _register_default_strategies(self):
        for handler in (
            CrashHandler,
            MuteLeaderHandler,
            EquivocateVotesHandler,
            InvalidProposalHandler,
            FabricatedLocksetHandler,
            FabricatedValueHandler,
        ):
            self.register(handler.kind, handler)

    def register(self, kind: str, handler_class: type[StrategyHandler]):
        """
        Register a handler for a strategy kind.

        Args:
            kind: Strategy discriminator (e.g. "crash")
            handler_class: Class implementing StrategyHandler
        """
        self._handlers[kind] = handler_class

    def get_handler(self, kind: str) -> StrategyHandler:
        handler_class = self._handlers.get(kind)
        if handler_class is None:
            raise KeyError(f"Unknown strategy: {kind}")
        return handler_class()

    def get_supported_strategies(self) -> list[str]:
        return list(self._handlers.keys())


# Global strategy registry instance
strategy_registry = StrategyRegistry()


def ensure_unforgeable(outbound: list[Outbound], ctx: AdversaryContext) -> None:
    """
    Sign what faulty nodes may sign and reject everything else.

    Raises:
        UnforgeableViolation: a message or embedded vote claims a non-faulty
            sender without a matching genuine vote
    """
    for item in outbound:
        message = item.message
        if message.sender not in ctx.faulty:
            raise UnforgeableViolation(
                f"Node {ctx.node} sent a {message.kind} under non-faulty id {message.sender}"
            )
        embedded = [message] if message.kind == "vote" else list(message.justification.votes.values())
        for vote in embedded:
            if vote.sender in ctx.faulty:
                ctx.registry.register(vote)
            elif not ctx.registry.is_genuine(vote):
                raise UnforgeableViolation(
                    f"Node {ctx.node} forged a round {vote.round} vote of node {vote.sender} for {vote.value}"
                )


def apply_node_strategy(
    output: NodeOutput,
    strategy: NodeStrategy,
    ctx: AdversaryContext,
) -> list[Outbound]:
    """
    Turn a faulty node's transition output into what it really sends.

    Args:
        output: Output of the node's honest state machine
        strategy: The node's configured strategy
        ctx: Adversary context

    Returns:
        Outbound messages with explicit recipients
    """
    handler = strategy_registry.get_handler(strategy.kind)
    outbound = handler.apply(strategy, broadcast(output.outgoing, ctx.n), output, ctx)
    ensure_unforgeable(outbound, ctx)
    if logger.isEnabledFor(logging.DEBUG) and outbound:
        logger.debug(f"t={ctx.time} faulty node {ctx.node} ({strategy.kind}) sends {len(outbound)} message(s)")
    return outbound
