"""
Pydantic models describing the Byzantine side of a scenario
"""
from enum import Enum
from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator


class CrashStrategy(BaseModel):
    """Node falls silent from `from_time` on."""
    model_config = ConfigDict(frozen=True)

    kind: Literal["crash"] = "crash"
    from_time: int = Field(default=0, ge=0)


class MuteLeaderStrategy(BaseModel):
    """Node never sends proposals but votes normally."""
    model_config = ConfigDict(frozen=True)

    kind: Literal["mute_leader"] = "mute_leader"


class EquivocateVotesStrategy(BaseModel):
    """Node sends one vote value to ids below `split` and another to the rest."""
    model_config = ConfigDict(frozen=True)

    kind: Literal["equivocate_votes"] = "equivocate_votes"
    split: int | None = Field(default=None, ge=1, description="Defaults to n // 2")


class InvalidProposalVariant(str, Enum):
    SHORT_LOCKSET = "short_lockset"
    CONSTRAINT_VIOLATION = "constraint_violation"
    EMPTY_VALUE = "empty_value"


class InvalidProposalStrategy(BaseModel):
    """As leader, sends a proposal that fails exactly one validity clause."""
    model_config = ConfigDict(frozen=True)

    kind: Literal["invalid_proposal"] = "invalid_proposal"
    variant: InvalidProposalVariant = InvalidProposalVariant.SHORT_LOCKSET


class FabricatedLocksetStrategy(BaseModel):
    """
    As leader, justifies its proposal with genuine votes plus votes fabricated
    for every faulty sender.
    """
    model_config = ConfigDict(frozen=True)

    kind: Literal["fabricated_lockset"] = "fabricated_lockset"
    attack_value: str | None = Field(default=None, description="Defaults to the node's initial value")


class FabricatedValueStrategy(BaseModel):
    """As leader, proposes a made-up value whenever the 2f+1 constraint does not bind."""
    model_config = ConfigDict(frozen=True)

    kind: Literal["fabricated_value"] = "fabricated_value"
    value: str = "fabricated"


NodeStrategy = Annotated[
    Union[
        CrashStrategy,
        MuteLeaderStrategy,
        EquivocateVotesStrategy,
        InvalidProposalStrategy,
        FabricatedLocksetStrategy,
        FabricatedValueStrategy,
    ],
    Field(discriminator="kind"),
]


class DelayRule(BaseModel):
    """
    Scripted delay for matching sends. Unset fields match anything.
    """
    model_config = ConfigDict(frozen=True)

    src: int | None = None
    dst: int | None = None
    send_time: int | None = None
    kind: Literal["vote", "proposal"] | None = None
    round: int | None = None
    delay: int = Field(ge=1)

    def matches(self, src: int, dst: int, send_time: int, kind: str | None = None,
                round: int | None = None) -> bool:
        return (
            (self.src is None or self.src == src)
            and (self.dst is None or self.dst == dst)
            and (self.send_time is None or self.send_time == send_time)
            and (self.kind is None or self.kind == kind)
            and (self.round is None or self.round == round)
        )


class PreGstPolicy(str, Enum):
    FIXED = "fixed"
    RANDOM = "random"


class PostGstPolicy(str, Enum):
    FIXED = "fixed"
    RANDOM = "random"
    MAX = "max"


class NetworkStrategy(BaseModel):
    """Delay schedule controlled by the adversary."""
    model_config = ConfigDict(frozen=True)

    pre_gst: PreGstPolicy = PreGstPolicy.FIXED
    pre_gst_delay: int = Field(default=1, ge=1)
    pre_gst_min: int = Field(default=1, ge=1)
    pre_gst_max: int = Field(default=100, ge=1)
    post_gst: PostGstPolicy = PostGstPolicy.FIXED
    post_gst_delay: int = Field(default=1, ge=1)
    scripted: list[DelayRule] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_range(self) -> "NetworkStrategy":
        if self.pre_gst_min > self.pre_gst_max:
            raise ValueError("pre_gst_min must not exceed pre_gst_max")
        return self


class AdversaryConfig(BaseModel):
    """
    Faulty nodes with their strategies, plus the network schedule.

    The faulty set is the set of nodes that have a strategy.
    """
    model_config = ConfigDict(frozen=True)

    nodes: dict[int, NodeStrategy] = Field(default_factory=dict)
    network: NetworkStrategy = Field(default_factory=NetworkStrategy)

    @property
    def faulty_set(self) -> frozenset[int]:
        return frozenset(self.nodes)

    @property
    def adversary_id(self) -> str:
        if not self.nodes:
            return "none"
        return ",".join(f"{node}:{self.nodes[node].kind}" for node in sorted(self.nodes))
