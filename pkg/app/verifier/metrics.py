"""
Metrics calculation utilities
"""
from collections import Counter

from app.sim.trace import (
    Committed,
    MessageSent,
    Proposed,
    ProposalRejected,
    RoundEntered,
    Trace,
    Voted,
)
from app.verifier.models import VerdictMetrics


class MetricsCalculator:
    """Derive message, round and commit statistics from a trace"""

    @staticmethod
    def rounds_without_proposal(trace: Trace) -> list[int]:
        """
        Rounds entered by some non-faulty node in which no proposal was sent.

        Args:
            trace: Run trace

        Returns:
            Sorted round numbers
        """
        entered = {r.round for r in trace.honest(RoundEntered)}
        proposed = {r.round for r in trace.of_type(Proposed)}
        return sorted(entered - proposed)

    @staticmethod
    def messages_per_round(trace: Trace) -> dict[int, int]:
        """Point-to-point sends grouped by the round of the message."""
        counts = Counter(r.message.round for r in trace.of_type(MessageSent))
        return dict(sorted(counts.items()))

    @staticmethod
    def commit_latency(trace: Trace) -> int | None:
        """Tick of the last non-faulty commit, or None if some node never committed."""
        commits = trace.honest(Committed)
        if len({c.node for c in commits}) < len(trace.honest_nodes):
            return None
        return max(c.time for c in commits)

    @staticmethod
    def calculate_all_metrics(trace: Trace) -> VerdictMetrics:
        """
        Calculate all metrics at once.

        Args:
            trace: Run trace

        Returns:
            VerdictMetrics for the run
        """
        commits = trace.honest(Committed)
        entered = trace.honest(RoundEntered)
        rejections = Counter(r.reason.value for r in trace.honest(ProposalRejected))
        return VerdictMetrics(
            outcome=trace.metadata.outcome.value,
            end_time=trace.metadata.end_time,
            events_processed=trace.metadata.events_processed,
            messages_sent=sum(1 for _ in trace.of_type(MessageSent)),
            votes_sent=sum(len(r.recipients) for r in trace.of_type(Voted)),
            proposals_sent=sum(len(r.recipients) for r in trace.of_type(Proposed)),
            commit_rounds={c.node: c.round for c in commits},
            commit_times={c.node: c.time for c in commits},
            committed_values={c.node: c.value.payload for c in commits},
            max_round=max((r.round for r in entered), default=1),
            rounds_without_proposal=MetricsCalculator.rounds_without_proposal(trace),
            rejections=dict(sorted(rejections.items())),
            messages_per_round=MetricsCalculator.messages_per_round(trace),
            commit_latency=MetricsCalculator.commit_latency(trace),
        )
