"""
Run orchestration: single runs, seed batches, persistence and replay
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from pathlib import Path
from typing import Iterable

from pydantic import BaseModel, Field

from app.harness.scenario import ScenarioConfig
from app.protocol.models import (
    CommitTimeout,
    NodeEvent,
    ProposalReceived,
    RoundStart,
    TimerKind,
    VoteReceived,
    VoteTimeout,
)
from app.protocol.replica import initial_state, step
from app.sim.registry import GenuinenessRegistry
from app.sim.simulator import run
from app.sim.trace import (
    Committed,
    MessageDelivered,
    MessageSent,
    Proposed,
    ProposalRejected,
    TimerFired,
    Trace,
    Voted,
)
from app.verifier.models import CheckStatus, Verdict
from app.verifier.verifier import TraceVerifier

logger = logging.getLogger(__name__)


def run_scenario(config: ScenarioConfig) -> tuple[Trace, Verdict]:
    """
    Simulate a scenario and check its trace.

    Args:
        config: Scenario, seed included

    Returns:
        (trace, verdict)
    """
    trace = run(config)
    verdict = TraceVerifier().verify(trace)
    return trace, verdict


def persist_run(trace: Trace, verdict: Verdict, out_dir: str | Path) -> tuple[Path, Path]:
    """Write `trace_seed<N>.jsonl` and `verdict_seed<N>.json` into `out_dir`."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = trace.scenario.seed
    trace_path = trace.save(out_dir / f"trace_seed{seed}.jsonl")
    verdict_path = out_dir / f"verdict_seed{seed}.json"
    verdict_path.write_text(verdict.model_dump_json(indent=2), encoding="utf-8")
    logger.info(f"Saved trace to {trace_path} and verdict to {verdict_path}")
    return trace_path, verdict_path


def check_trace(path: str | Path) -> Verdict:
    """Re-run the oracles on a saved trace."""
    return TraceVerifier().verify(Trace.load(path))


class CheckTally(BaseModel):
    passed: int = 0
    failed: int = 0
    inconclusive: int = 0
    not_applicable: int = 0
    first_failing_seed: int | None = None

    def add(self, seed: int, status: CheckStatus) -> None:
        if status == CheckStatus.PASS:
            self.passed += 1
        elif status == CheckStatus.FAIL:
            self.failed += 1
            if self.first_failing_seed is None or seed < self.first_failing_seed:
                self.first_failing_seed = seed
        elif status == CheckStatus.INCONCLUSIVE:
            self.inconclusive += 1
        else:
            self.not_applicable += 1


class SeedOutcome(BaseModel):
    seed: int
    statuses: dict[str, CheckStatus]
    failures: dict[str, str] = Field(default_factory=dict, description="Check -> failure detail")
    rerun: bool = Field(default=False, description="Re-run with a doubled horizon after an inconclusive result")
    max_round: int = 1


class BatchSummary(BaseModel):
    """Aggregate of one scenario over many seeds, ordered by seed."""
    adversary_id: str
    runs: int
    reruns: int = 0
    tallies: dict[str, CheckTally] = Field(default_factory=dict)
    outcomes: list[SeedOutcome] = Field(default_factory=list)

    def statuses(self) -> dict[str, CheckStatus]:
        """Worst status per check across the batch."""
        worst: dict[str, CheckStatus] = {}
        for name, tally in self.tallies.items():
            if tally.failed:
                worst[name] = CheckStatus.FAIL
            elif tally.inconclusive:
                worst[name] = CheckStatus.INCONCLUSIVE
            elif tally.passed:
                worst[name] = CheckStatus.PASS
            else:
                worst[name] = CheckStatus.NOT_APPLICABLE
        return worst


def _run_seed(config: ScenarioConfig, seed: int) -> SeedOutcome:
    scenario = config.with_seed(seed)
    _, verdict = run_scenario(scenario)
    rerun = False
    if verdict.status("liveness") == CheckStatus.INCONCLUSIVE:
        rerun = True
        scenario = scenario.model_copy(update={"horizon": scenario.horizon.doubled()})
        logger.info(f"Seed {seed}: liveness inconclusive, re-running up to t={scenario.horizon.max_time}")
        _, verdict = run_scenario(scenario)
        if verdict.status("liveness") == CheckStatus.INCONCLUSIVE:
            logger.warning(f"Seed {seed}: liveness still inconclusive at t={scenario.horizon.max_time}")
    return SeedOutcome(
        seed=seed,
        statuses={name: result.status for name, result in verdict.checks.items()},
        failures={name: verdict.checks[name].detail for name in verdict.failed},
        rerun=rerun,
        max_round=verdict.metrics.max_round,
    )


def batch(config: ScenarioConfig, seeds: Iterable[int], workers: int = 1) -> BatchSummary:
    """
    Run one scenario for many seeds.

    Args:
        config: Scenario template; its seed is replaced
        seeds: Seeds to run
        workers: Worker processes; 1 runs in-process

    Returns:
        BatchSummary with outcomes sorted by seed
    """
    seeds = sorted(set(seeds))
    logger.info(f"Running {len(seeds)} seeds with {workers} worker(s)")
    worker = partial(_run_seed, config)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            outcomes = list(executor.map(worker, seeds, chunksize=max(1, len(seeds) // (workers * 4))))
    else:
        outcomes = [worker(seed) for seed in seeds]
    outcomes.sort(key=lambda o: o.seed)

    summary = BatchSummary(adversary_id=config.adversary.adversary_id, runs=len(outcomes))
    for outcome in outcomes:
        summary.reruns += int(outcome.rerun)
        for name, status in outcome.statuses.items():
            summary.tallies.setdefault(name, CheckTally()).add(outcome.seed, status)
    summary.outcomes = outcomes

    failing = {name: t.first_failing_seed for name, t in summary.tallies.items() if t.failed}
    if failing:
        logger.warning(f"Batch failures (first failing seed per check): {failing}")
    return summary


class NodeReplay(BaseModel):
    node: int
    consistent: bool
    mismatches: list[str] = Field(default_factory=list)
    events_replayed: int = 0


class ReplayReport(BaseModel):
    consistent: bool
    nodes: list[NodeReplay]


def _node_inputs(trace: Trace, node: int) -> list[NodeEvent]:
    inputs: list[NodeEvent] = [RoundStart(round=1)]
    for rec in trace.records:
        if isinstance(rec, MessageDelivered) and rec.recipient == node:
            message = rec.message
            if message.kind == "proposal":
                inputs.append(ProposalReceived(proposal=message))
            else:
                inputs.append(VoteReceived(vote=message))
        elif isinstance(rec, TimerFired) and rec.node == node:
            if rec.timer == TimerKind.VOTE:
                inputs.append(VoteTimeout(round=rec.round))
            else:
                inputs.append(CommitTimeout(round=rec.round))
    return inputs


def _signed_votes(trace: Trace) -> GenuinenessRegistry:
    registry = GenuinenessRegistry()
    faulty = trace.faulty
    for rec in trace.of_type(MessageSent):
        message = rec.message
        if message.kind == "vote":
            registry.register(message)
        elif rec.sender in faulty:
            for vote in message.justification.votes.values():
                if vote.sender in faulty:
                    registry.register(vote)
    return registry


def replay_trace(trace: Trace) -> ReplayReport:
    """
    Feed every non-faulty node its recorded inputs again and compare what
    the state machine produces with what the trace says it did.

    Args:
        trace: Saved trace

    Returns:
        ReplayReport, consistent when every node reproduces its sends,
        rejections and commit
    """
    scenario = trace.scenario
    cfg = scenario.protocol_config()
    registry = _signed_votes(trace)
    reports = []

    for node in trace.honest_nodes:
        expected = [
            (rec.record, rec.round, rec.value)
            for rec in trace.records
            if isinstance(rec, (Voted, Proposed)) and rec.node == node
        ]
        expected_rejections = [
            (rec.round, rec.proposer, rec.reason)
            for rec in trace.records
            if isinstance(rec, ProposalRejected) and rec.node == node
        ]
        expected_commit = next(
            ((rec.round, rec.value) for rec in trace.records if isinstance(rec, Committed) and rec.node == node),
            None,
        )

        state = initial_state(node, scenario.initial_value(node), cfg)
        produced = []
        rejections = []
        inputs = _node_inputs(trace, node)
        for event in inputs:
            state, output = step(state, event, cfg, registry)
            produced.extend(
                ("voted" if m.kind == "vote" else "proposed", m.round, m.value) for m in output.outgoing
            )
            rejections.extend((r.round, r.sender, r.reason) for r in output.rejections)

        mismatches = []
        if produced != expected:
            mismatches.append(f"sent {len(produced)} message(s), trace records {len(expected)}")
        if rejections != expected_rejections:
            mismatches.append(f"rejected {len(rejections)} proposal(s), trace records {len(expected_rejections)}")
        actual_commit = (state.commit_round, state.committed) if state.committed is not None else None
        if actual_commit != expected_commit:
            mismatches.append(f"commit {actual_commit} differs from recorded {expected_commit}")
        reports.append(NodeReplay(
            node=node, consistent=not mismatches, mismatches=mismatches, events_replayed=len(inputs),
        ))

    consistent = all(r.consistent for r in reports)
    if not consistent:
        logger.warning(f"Replay diverged for nodes {[r.node for r in reports if not r.consistent]}")
    return ReplayReport(consistent=consistent, nodes=reports)
