"""
Simulator event and delay models
"""
from enum import Enum
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

from app.protocol.models import Message, TimerKind


class DelayModel(BaseModel):
    """
    Partial synchrony: before `gst` delays are arbitrary (but finite), from
    `gst` on every message between non-faulty nodes arrives within `delta`.
    """
    model_config = ConfigDict(frozen=True)

    gst: int = Field(ge=0)
    delta: int = Field(gt=0)


class Deliver(BaseModel):
    kind: Literal["deliver"] = "deliver"
    message: Message
    sender: int
    recipient: int
    sent_at: int


class TimerFire(BaseModel):
    kind: Literal["timer"] = "timer"
    node: int
    timer: TimerKind
    round: int


SimEvent = Deliver | TimerFire


class RunOutcome(str, Enum):
    COMMITTED = "committed"
    HORIZON_EXHAUSTED = "horizon_exhausted"
