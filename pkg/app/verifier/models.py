"""
Pydantic models for oracle verdicts
"""
from enum import Enum

from pydantic import BaseModel, Field, model_validator

from app.sim.trace import TraceRecord


class CheckStatus(str, Enum):
    """Outcome of one oracle"""
    PASS = "pass"
    FAIL = "fail"
    NOT_APPLICABLE = "not_applicable"
    INCONCLUSIVE = "inconclusive"


class CheckResult(BaseModel):
    """
    Result of one oracle over one trace.

    A failure always carries the trace records that demonstrate it.
    """
    name: str = Field(description="Oracle name (agreement, lock_in, ...)")
    status: CheckStatus
    detail: str = Field(default="", description="Human-readable explanation")
    witness: list[TraceRecord] = Field(default_factory=list, description="Records demonstrating a failure")

    @model_validator(mode="after")
    def _failure_needs_witness(self) -> "CheckResult":
        if self.status == CheckStatus.FAIL and not self.witness:
            raise ValueError(f"{self.name}: a failing check needs a witness")
        return self

    @property
    def passed(self) -> bool:
        return self.status == CheckStatus.PASS


class VerdictMetrics(BaseModel):
    """Per-run numbers reported next to the oracle results"""
    outcome: str
    end_time: int
    events_processed: int
    messages_sent: int = Field(description="Point-to-point sends, one per recipient")
    votes_sent: int
    proposals_sent: int
    commit_rounds: dict[int, int] = Field(default_factory=dict, description="Node -> round of commit")
    commit_times: dict[int, int] = Field(default_factory=dict, description="Node -> tick of commit")
    committed_values: dict[int, str | None] = Field(default_factory=dict)
    max_round: int = Field(default=1, description="Highest round entered by a non-faulty node")
    rounds_without_proposal: list[int] = Field(default_factory=list)
    rejections: dict[str, int] = Field(default_factory=dict, description="Rejection reason -> count")
    messages_per_round: dict[int, int] = Field(default_factory=dict, description="Message round -> point-to-point sends")
    commit_latency: int | None = Field(default=None, description="Tick of the last non-faulty commit")


class Verdict(BaseModel):
    """
    All oracle results for one trace.
    """
    seed: int
    adversary_id: str
    checks: dict[str, CheckResult] = Field(default_factory=dict)
    metrics: VerdictMetrics

    def status(self, name: str) -> CheckStatus | None:
        result = self.checks.get(name)
        return result.status if result else None

    @property
    def failed(self) -> list[str]:
        return [name for name, result in self.checks.items() if result.status == CheckStatus.FAIL]

    @property
    def inconclusive(self) -> list[str]:
        return [name for name, result in self.checks.items() if result.status == CheckStatus.INCONCLUSIVE]
