"""
Run traces

A trace is the ordered list of everything observable in a run. It is stored
as JSON Lines: one metadata line first, then one record per line. The same
seed always yields the same file byte for byte.
"""
from pathlib import Path
from typing import Annotated, Iterator, Literal, TypeVar, Union

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter

from app.harness.scenario import ScenarioConfig
from app.protocol.models import Message, RejectionReason, TimerKind, Value
from app.sim.models import RunOutcome


class _Record(BaseModel):
    model_config = ConfigDict(frozen=True)

    time: int


class MessageSent(_Record):
    record: Literal["sent"] = "sent"
    sender: int
    recipient: int
    deliver_at: int
    message: Message


class MessageDelivered(_Record):
    record: Literal["delivered"] = "delivered"
    sender: int
    recipient: int
    sent_at: int
    message: Message


class TimerArmed(_Record):
    record: Literal["timer_armed"] = "timer_armed"
    node: int
    timer: TimerKind
    round: int
    fires_at: int


class TimerFired(_Record):
    record: Literal["timer_fired"] = "timer_fired"
    node: int
    timer: TimerKind
    round: int


class Voted(_Record):
    record: Literal["voted"] = "voted"
    node: int
    round: int
    value: Value
    recipients: list[int]


class Proposed(_Record):
    record: Literal["proposed"] = "proposed"
    node: int
    round: int
    value: Value
    recipients: list[int]


class Committed(_Record):
    record: Literal["committed"] = "committed"
    node: int
    round: int
    value: Value


class RoundEntered(_Record):
    record: Literal["round_entered"] = "round_entered"
    node: int
    round: int


class ProposalRejected(_Record):
    record: Literal["proposal_rejected"] = "proposal_rejected"
    node: int
    round: int
    proposer: int
    reason: RejectionReason


TraceRecord = Annotated[
    Union[
        MessageSent,
        MessageDelivered,
        TimerArmed,
        TimerFired,
        Voted,
        Proposed,
        Committed,
        RoundEntered,
        ProposalRejected,
    ],
    Field(discriminator="record"),
]

_record_adapter = TypeAdapter(TraceRecord)

R = TypeVar("R", bound=_Record)


class TraceMetadata(BaseModel):
    """Header line of a trace file; enough to re-run or replay it."""
    record: Literal["meta"] = "meta"
    scenario: ScenarioConfig
    n: int
    faulty: list[int]
    adversary_id: str
    outcome: RunOutcome
    end_time: int
    events_processed: int


class Trace:
    """Metadata plus records in processing order."""

    def __init__(self, metadata: TraceMetadata, records: list[TraceRecord]):
        self.metadata = metadata
        self.records = records

    @property
    def scenario(self) -> ScenarioConfig:
        return self.metadata.scenario

    @property
    def faulty(self) -> frozenset[int]:
        return frozenset(self.metadata.faulty)

    @property
    def honest_nodes(self) -> list[int]:
        return [u for u in range(self.metadata.n) if u not in self.faulty]

    def of_type(self, record_type: type[R]) -> Iterator[R]:
        return (r for r in self.records if isinstance(r, record_type))

    def honest(self, record_type: type[R]) -> list[R]:
        """Records of one type emitted by non-faulty nodes."""
        faulty = self.faulty
        return [r for r in self.records if isinstance(r, record_type) and r.node not in faulty]

    def serialize(self) -> str:
        lines = [self.metadata.model_dump_json()]
        lines.extend(r.model_dump_json() for r in self.records)
        return "\n".join(lines) + "\n"

    @classmethod
    def deserialize(cls, text: str) -> "Trace":
        lines = [line for line in text.splitlines() if line.strip()]
        if not lines:
            raise ValueError("Empty trace")
        metadata = TraceMetadata.model_validate_json(lines[0])
        records = [_record_adapter.validate_json(line) for line in lines[1:]]
        return cls(metadata, records)

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.serialize(), encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: str | Path) -> "Trace":
        return cls.deserialize(Path(path).read_text(encoding="utf-8"))

    def __len__(self) -> int:
        return len(self.records)
