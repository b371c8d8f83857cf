"""
Pydantic models for the two-step consensus protocol

Wire messages, locksets, per-node state and the event/output types of the
replica transition function.
"""
from collections import Counter
from enum import Enum
from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator


NodeId = int


class Mutation(str, Enum):
    """Deliberate protocol defects used to check that the oracles notice them"""
    NONE = "none"
    WEAK_COMMIT_QUORUM = "weak_commit_quorum"
    NO_PROPOSAL_CONSTRAINT = "no_proposal_constraint"
    NO_TIMEOUT_DOUBLING = "no_timeout_doubling"
    REVOTE_INITIAL_AFTER_COMMIT = "revote_initial_after_commit"


class ProtocolConfig(BaseModel):
    """
    Static protocol parameters shared by every replica.

    The node count is always 5f+1 and the vote timeout must expire before
    the commit timeout.
    """
    model_config = ConfigDict(frozen=True)

    f: int = Field(ge=0, description="Maximum number of faulty nodes")
    n: int = Field(ge=1, description="Number of nodes")
    to_vote_base: int = Field(gt=0, description="TO_vote of round 1, in ticks")
    to_commit_base: int = Field(gt=0, description="TO_commit of round 1, in ticks")
    mutation: Mutation = Field(default=Mutation.NONE, description="Injected protocol defect")

    @model_validator(mode="after")
    def _check_invariants(self) -> "ProtocolConfig":
        if self.n != 5 * self.f + 1:
            raise ValueError(f"n must equal 5f+1 (f={self.f}, n={self.n})")
        if self.to_vote_base >= self.to_commit_base:
            raise ValueError("TO_vote < TO_commit required")
        return self

    @classmethod
    def for_faults(cls, f: int, to_vote_base: int = 10, to_commit_base: int = 30,
                   mutation: Mutation = Mutation.NONE) -> "ProtocolConfig":
        return cls(f=f, n=5 * f + 1, to_vote_base=to_vote_base,
                   to_commit_base=to_commit_base, mutation=mutation)

    @property
    def q_hi(self) -> int:
        """Commit and lockset-validity quorum, 4f+1."""
        return 4 * self.f + 1

    @property
    def q_lo(self) -> int:
        """Support that forces a proposal value, 2f+1."""
        return 2 * self.f + 1

    @property
    def commit_quorum(self) -> int:
        if self.mutation == Mutation.WEAK_COMMIT_QUORUM:
            return 3 * self.f + 1
        return self.q_hi

    def to_vote(self, round: int) -> int:
        return self.to_vote_base * self._scale(round)

    def to_commit(self, round: int) -> int:
        return self.to_commit_base * self._scale(round)

    def round_entry_time(self, round: int) -> int:
        """Tick at which every node enters `round` (rounds advance on timers only)."""
        return sum(self.to_commit(r) for r in range(1, round))

    def _scale(self, round: int) -> int:
        if self.mutation == Mutation.NO_TIMEOUT_DOUBLING:
            return 1
        return 2 ** (round - 1)


class Value(BaseModel):
    """
    Candidate value. `payload=None` is the distinguished Empty value.

    Payloads are ordered lexicographically by their UTF-8 bytes.
    """
    model_config = ConfigDict(frozen=True)

    payload: str | None = None

    @property
    def is_empty(self) -> bool:
        return self.payload is None

    def sort_key(self) -> bytes:
        return b"" if self.payload is None else self.payload.encode("utf-8")

    def __str__(self) -> str:
        return "∅" if self.payload is None else self.payload


EMPTY = Value()


class VoteMessage(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["vote"] = "vote"
    round: int = Field(ge=1)
    value: Value
    sender: NodeId = Field(ge=0)


class Lockset(BaseModel):
    """
    Votes of one round as received by a node, at most one per sender.

    Round 0 is the empty justification carried by round-1 proposals.
    """
    model_config = ConfigDict(frozen=True)

    round: int = Field(ge=0)
    votes: dict[NodeId, VoteMessage] = Field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.votes)

    def with_vote(self, vote: VoteMessage) -> "Lockset":
        """Return a lockset including `vote`; the first vote per sender wins."""
        if vote.sender in self.votes:
            return self
        return Lockset(round=self.round, votes={**self.votes, vote.sender: vote})

    def support(self) -> Counter:
        """Number of votes per value."""
        return Counter(v.value for v in self.votes.values())


class ProposalMessage(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["proposal"] = "proposal"
    round: int = Field(ge=1)
    value: Value
    sender: NodeId = Field(ge=0)
    justification: Lockset = Field(default_factory=lambda: Lockset(round=0))


Message = Annotated[Union[VoteMessage, ProposalMessage], Field(discriminator="kind")]


class RejectionReason(str, Enum):
    WRONG_LEADER = "WrongLeader"
    EMPTY_VALUE = "EmptyValue"
    INVALID_LOCKSET = "InvalidLockset"
    FORGED_VOTE = "ForgedVote"
    CONSTRAINT_VIOLATED = "ConstraintViolated"


class TimerKind(str, Enum):
    VOTE = "vote_timeout"
    COMMIT = "commit_timeout"


class TimerRequest(BaseModel):
    """A timer the driver must arm, relative to the current tick."""
    model_config = ConfigDict(frozen=True)

    kind: TimerKind
    round: int
    duration: int = Field(gt=0)


class ProposalRejection(BaseModel):
    model_config = ConfigDict(frozen=True)

    round: int
    sender: NodeId
    reason: RejectionReason


class NodeState(BaseModel):
    """
    Full protocol state of one replica.

    Only current_round and current_round - 1 locksets are retained, plus the
    lockset of the commit round as evidence. Proposals for future rounds wait
    in `pending_proposals` until the node enters that round.
    """
    model_config = ConfigDict(frozen=True)

    id: NodeId
    initial_value: Value
    current_round: int = 1
    to_vote: int
    to_commit: int
    voted_this_round: bool = False
    last_vote_value: Value | None = None
    locksets: dict[int, Lockset] = Field(default_factory=dict)
    committed: Value | None = None
    commit_round: int | None = None
    pending_proposals: dict[int, tuple[ProposalMessage, ...]] = Field(default_factory=dict)

    def lockset(self, round: int) -> Lockset:
        return self.locksets.get(round) or Lockset(round=round)


class RoundStart(BaseModel):
    kind: Literal["round_start"] = "round_start"
    round: int


class ProposalReceived(BaseModel):
    kind: Literal["proposal_received"] = "proposal_received"
    proposal: ProposalMessage


class VoteReceived(BaseModel):
    kind: Literal["vote_received"] = "vote_received"
    vote: VoteMessage


class VoteTimeout(BaseModel):
    kind: Literal["vote_timeout"] = "vote_timeout"
    round: int


class CommitTimeout(BaseModel):
    kind: Literal["commit_timeout"] = "commit_timeout"
    round: int


NodeEvent = Annotated[
    Union[RoundStart, ProposalReceived, VoteReceived, VoteTimeout, CommitTimeout],
    Field(discriminator="kind"),
]


class NodeOutput(BaseModel):
    """
    Everything a transition asks of its driver.

    Outgoing messages are broadcast to all nodes, the sender included.
    """
    outgoing: list[Message] = Field(default_factory=list)
    timers: list[TimerRequest] = Field(default_factory=list)
    committed_now: Value | None = None
    round_advanced: bool = False
    entered_round: int | None = None
    rejections: list[ProposalRejection] = Field(default_factory=list)

    def merge(self, other: "NodeOutput") -> "NodeOutput":
        return NodeOutput(
            outgoing=self.outgoing + other.outgoing,
            timers=self.timers + other.timers,
            committed_now=self.committed_now or other.committed_now,
            round_advanced=self.round_advanced or other.round_advanced,
            entered_round=other.entered_round or self.entered_round,
            rejections=self.rejections + other.rejections,
        )
