"""
Trace oracles

Each check reads a finished trace and decides one property. Records of
faulty nodes are never held against the protocol.
"""
import logging
from collections import Counter

from app.harness.scenario import CheckName
from app.protocol.models import Mutation, ProtocolConfig
from app.sim.trace import (
    Committed,
    MessageDelivered,
    MessageSent,
    Proposed,
    RoundEntered,
    TimerFired,
    Trace,
    Voted,
)
from app.verifier.metrics import MetricsCalculator
from app.verifier.models import CheckResult, CheckStatus, Verdict

logger = logging.getLogger(__name__)

SAFETY_CHECKS = ("agreement", "lock_in", "validity_weak")
PROGRESS_CHECKS = ("liveness", "two_step")


def _passed(name: str, detail: str = "") -> CheckResult:
    return CheckResult(name=name, status=CheckStatus.PASS, detail=detail)


def _failed(name: str, detail: str, witness: list) -> CheckResult:
    return CheckResult(name=name, status=CheckStatus.FAIL, detail=detail, witness=witness)


def check_agreement(trace: Trace) -> CheckResult:
    """No two non-faulty nodes commit different values."""
    commits = trace.honest(Committed)
    if not commits:
        return _passed("agreement", "no commits")
    first = commits[0]
    for other in commits[1:]:
        if other.value != first.value:
            return _failed(
                "agreement",
                f"node {first.node} committed {first.value} in round {first.round}, "
                f"node {other.node} committed {other.value} in round {other.round}",
                [first, other],
            )
    return _passed("agreement", f"{len(commits)} commits of {first.value}")


def check_lock_in(trace: Trace) -> CheckResult:
    """
    Once some non-faulty node commits b in round r*, every later commit is b
    and no node that voted b in r* votes anything else afterwards.
    """
    commits = trace.honest(Committed)
    if not commits:
        return _passed("lock_in", "no commits")

    r_star = min(c.round for c in commits)
    first = next(c for c in commits if c.round == r_star)
    b = first.value

    for c in commits:
        if c.round > r_star and c.value != b:
            return _failed(
                "lock_in",
                f"{b} committed in round {r_star} but node {c.node} committed {c.value} in round {c.round}",
                [first, c],
            )

    votes = trace.honest(Voted)
    locked = {v.node for v in votes if v.round == r_star and v.value == b}
    for v in votes:
        if v.round > r_star and v.node in locked and v.value != b:
            return _failed(
                "lock_in",
                f"node {v.node} voted {b} in round {r_star} but {v.value} in round {v.round}",
                [first, v],
            )
    return _passed("lock_in", f"locked on {b} from round {r_star}")


def check_validity(trace: Trace) -> tuple[CheckResult, CheckResult]:
    """
    Strict validity: every committed value is some node's initial value.
    Weak validity: every committed value was proposed in the run.

    Returns:
        (strict result, weak result)
    """
    initials = set(trace.scenario.initial_values)
    proposals: dict = {}
    for p in trace.of_type(Proposed):
        proposals.setdefault(p.value, p)

    strict = _passed("validity_strict")
    weak = _passed("validity_weak")
    for c in trace.honest(Committed):
        proposal = proposals.get(c.value)
        if strict.passed and c.value.payload not in initials:
            detail = f"node {c.node} committed {c.value}, which is no node's initial value"
            if proposal is not None and proposal.node in trace.faulty:
                detail += f" (proposed by faulty node {proposal.node})"
            strict = _failed("validity_strict", detail, [c] + ([proposal] if proposal else []))
        if weak.passed and proposal is None:
            weak = _failed("validity_weak", f"node {c.node} committed {c.value}, which was never proposed", [c])
    return strict, weak


def check_two_step(trace: Trace) -> CheckResult:
    """
    In a synchronous run without faults, every node commits in round 1 after
    one proposal delivery and one vote delivery step, before any timer fires.
    """
    if trace.faulty or trace.scenario.gst > 0:
        return CheckResult(
            name="two_step",
            status=CheckStatus.NOT_APPLICABLE,
            detail="only defined for fault-free runs that are synchronous from t=0",
        )

    for u in trace.honest_nodes:
        proposals_seen = []
        vote = None
        commit = None
        last_entry = None
        for rec in trace.records:
            if isinstance(rec, Committed) and rec.node == u:
                commit = rec
                break
            if isinstance(rec, TimerFired) and rec.node == u:
                return _failed("two_step", f"node {u} timer {rec.timer.value} fired before it committed", [rec])
            if isinstance(rec, MessageDelivered) and rec.recipient == u and rec.message.kind == "proposal":
                proposals_seen.append(rec)
            elif isinstance(rec, Voted) and rec.node == u and vote is None:
                vote = rec
            elif isinstance(rec, RoundEntered) and rec.node == u:
                last_entry = rec

        if commit is None:
            return _failed("two_step", f"node {u} never committed", [last_entry] if last_entry else [])
        if commit.round != 1:
            return _failed("two_step", f"node {u} committed in round {commit.round}", [commit])
        if len(proposals_seen) != 1:
            return _failed(
                "two_step",
                f"node {u} saw {len(proposals_seen)} proposal deliveries before committing",
                proposals_seen or [commit],
            )
        delivery = proposals_seen[0]
        if vote is None or vote.time != delivery.time or vote.value != delivery.message.value:
            return _failed(
                "two_step",
                f"node {u} did not vote for the proposal on delivery",
                [delivery] + ([vote] if vote else [commit]),
            )
    return _passed("two_step", "every node committed in round 1 in two message delays")


def first_good_round(
    contract: ProtocolConfig,
    delta: int,
    gst: int,
    observed_entries: dict[int, int] | None = None,
    max_round: int = 256,
) -> int:
    """
    First round whose timeouts fit two network delays and that starts at or
    after GST.

    Args:
        contract: Timeouts the protocol promises (doubling every round)
        delta: Post-GST delay bound
        gst: Global stabilization time
        observed_entries: Round -> latest non-faulty entry tick seen in a trace
        max_round: Search limit

    Returns:
        The round number
    """
    observed_entries = observed_entries or {}
    for r in range(1, max_round + 1):
        to_vote = contract.to_vote(r)
        entry = observed_entries.get(r, contract.round_entry_time(r))
        if to_vote >= 2 * delta and contract.to_commit(r) >= to_vote + 2 * delta and entry >= gst:
            return r
    raise ValueError(f"no round up to {max_round} satisfies the timeout contract")


def check_liveness(trace: Trace, horizon: int | None = None) -> CheckResult:
    """
    Every non-faulty node commits by round r_ok + f + 2.

    Args:
        trace: Run trace
        horizon: Optional tick after which the trace is ignored

    Returns:
        pass, fail, or inconclusive when the run ends before the bound is
        reached with some node still uncommitted
    """
    scenario = trace.scenario
    contract = scenario.protocol_config().model_copy(update={"mutation": Mutation.NONE})
    records = trace.records if horizon is None else [r for r in trace.records if r.time <= horizon]
    end_time = trace.metadata.end_time if horizon is None else min(horizon, trace.metadata.end_time)
    faulty = trace.faulty

    entries: dict[int, int] = {}
    first_entry: dict[tuple[int, int], RoundEntered] = {}
    last_round: dict[int, int] = {}
    commits: dict[int, Committed] = {}
    for rec in records:
        if isinstance(rec, RoundEntered) and rec.node not in faulty:
            entries[rec.round] = max(entries.get(rec.round, rec.time), rec.time)
            first_entry.setdefault((rec.node, rec.round), rec)
            last_round[rec.node] = max(last_round.get(rec.node, 0), rec.round)
        elif isinstance(rec, Committed) and rec.node not in faulty:
            commits.setdefault(rec.node, rec)

    r_ok = first_good_round(contract, scenario.delta, scenario.gst, entries)
    bound = r_ok + scenario.f + 2

    late = [c for c in commits.values() if c.round > bound]
    if late:
        c = late[0]
        return _failed("liveness", f"node {c.node} committed in round {c.round}, bound is {bound}", [c])

    uncommitted = [u for u in trace.honest_nodes if u not in commits]
    for u in uncommitted:
        if last_round.get(u, 0) > bound:
            witness = first_entry[(u, bound + 1)]
            return _failed(
                "liveness",
                f"node {u} entered round {bound + 1} without committing (r_ok={r_ok}, bound={bound})",
                [witness],
            )

    if not uncommitted:
        latest = max((c.round for c in commits.values()), default=0)
        return _passed("liveness", f"all committed by round {latest}, bound {bound}")
    return CheckResult(
        name="liveness",
        status=CheckStatus.INCONCLUSIVE,
        detail=(
            f"HorizonTooShort: run ended at t={end_time} with {len(uncommitted)} node(s) uncommitted "
            f"before round {bound} (r_ok={r_ok}) was completed"
        ),
    )


def check_network(trace: Trace) -> CheckResult:
    """
    Message conservation, post-GST delay bound and delivery of everything due
    before the run ended.
    """
    scenario = trace.scenario
    faulty = trace.faulty

    def key(sender, recipient, at, message):
        return sender, recipient, at, message.kind, message.round, message.value.payload

    in_flight: Counter = Counter()
    first_send: dict = {}
    for rec in trace.records:
        if isinstance(rec, MessageSent):
            k = key(rec.sender, rec.recipient, rec.deliver_at, rec.message)
            in_flight[k] += 1
            first_send.setdefault(k, rec)
            if (
                rec.time >= scenario.gst
                and rec.sender not in faulty
                and rec.recipient not in faulty
                and rec.deliver_at - rec.time > scenario.delta
            ):
                return _failed(
                    "network",
                    f"message {rec.sender}->{rec.recipient} sent at t={rec.time} took "
                    f"{rec.deliver_at - rec.time} > delta={scenario.delta}",
                    [rec],
                )
        elif isinstance(rec, MessageDelivered):
            k = key(rec.sender, rec.recipient, rec.time, rec.message)
            if in_flight[k] <= 0:
                return _failed("network", f"delivery {rec.sender}->{rec.recipient} at t={rec.time} was never sent",
                               [rec])
            in_flight[k] -= 1

    end_time = trace.metadata.end_time
    for k, count in in_flight.items():
        if count > 0 and k[2] < end_time:
            rec = first_send[k]
            return _failed("network", f"message due at t={rec.deliver_at} was never delivered", [rec])
    return _passed("network")


class TraceVerifier:
    """
    Runs the configured oracles over traces.
    """

    def __init__(self, checks: list[CheckName] | None = None):
        """
        Args:
            checks: Oracles to run; defaults to the trace's scenario checks
        """
        self.checks = checks

    def verify(self, trace: Trace) -> Verdict:
        """
        Check a single trace.

        Returns:
            Verdict with every requested check and the run metrics
        """
        checks = self.checks if self.checks is not None else trace.scenario.checks
        results: dict[str, CheckResult] = {}
        for check in checks:
            if check == CheckName.AGREEMENT:
                results["agreement"] = check_agreement(trace)
            elif check == CheckName.LOCK_IN:
                results["lock_in"] = check_lock_in(trace)
            elif check == CheckName.VALIDITY:
                strict, weak = check_validity(trace)
                results[strict.name] = strict
                results[weak.name] = weak
            elif check == CheckName.TWO_STEP:
                results["two_step"] = check_two_step(trace)
            elif check == CheckName.LIVENESS:
                results["liveness"] = check_liveness(trace)
            elif check == CheckName.NETWORK:
                results["network"] = check_network(trace)

        verdict = Verdict(
            seed=trace.scenario.seed,
            adversary_id=trace.metadata.adversary_id,
            checks=results,
            metrics=MetricsCalculator.calculate_all_metrics(trace),
        )
        if verdict.failed:
            logger.warning(f"Seed {verdict.seed} ({verdict.adversary_id}): failed {', '.join(verdict.failed)}")
        return verdict
