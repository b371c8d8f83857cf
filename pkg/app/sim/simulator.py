"""
Deterministic discrete-event simulator

Drives all replicas over a virtual clock under the partial-synchrony model.
Events are ordered by (time, insertion sequence), and every random choice
is derived from the scenario seed, so a scenario and a seed determine the
trace completely.
"""
import heapq
import logging

from app.adversary.network import post_gst_delay, pre_gst_delays
from app.adversary.strategies import (
    AdversaryContext,
    apply_node_strategy,
    broadcast,
    strategy_registry,
)
from app.harness.scenario import ScenarioConfig
from app.protocol.models import (
    CommitTimeout,
    Message,
    NodeEvent,
    NodeOutput,
    ProposalReceived,
    RoundStart,
    TimerKind,
    VoteReceived,
    VoteTimeout,
)
from app.protocol.replica import initial_state, step
from app.sim.models import Deliver, DelayModel, RunOutcome, SimEvent, TimerFire
from app.sim.registry import GenuinenessRegistry
from app.sim.trace import (
    Committed,
    MessageDelivered,
    MessageSent,
    Proposed,
    ProposalRejected,
    RoundEntered,
    TimerArmed,
    TimerFired,
    Trace,
    TraceMetadata,
    TraceRecord,
    Voted,
)

logger = logging.getLogger(__name__)


class DelayBoundViolation(RuntimeError):
    """The adversary scheduled a delay the network model does not allow."""


class Simulation:
    """
    One run of a scenario.

    Usage:
        trace = Simulation(scenario).run()
    """

    def __init__(self, scenario: ScenarioConfig):
        self.scenario = scenario
        self.cfg = scenario.protocol_config()
        self.n = self.cfg.n
        self.faulty = scenario.adversary.faulty_set
        self.delays = DelayModel(gst=scenario.gst, delta=scenario.delta)
        self.network = scenario.adversary.network
        self.registry = GenuinenessRegistry()

        self.now = 0
        self.events_processed = 0
        self.records: list[TraceRecord] = []
        self._queue: list[tuple[int, int, SimEvent]] = []
        self._seq = 0
        self._states = {}
        self._uncommitted = {u for u in range(self.n) if u not in self.faulty}

    def run(self) -> Trace:
        """
        Execute the scenario until every non-faulty node has committed or the
        horizon is reached.

        Returns:
            The complete trace of the run
        """
        horizon = self.scenario.horizon
        logger.info(
            f"Running f={self.cfg.f} n={self.n} seed={self.scenario.seed} "
            f"adversary={self.scenario.adversary.adversary_id} gst={self.delays.gst} delta={self.delays.delta}"
        )

        for node in range(self.n):
            self._states[node] = initial_state(node, self.scenario.initial_value(node), self.cfg)
        for node in range(self.n):
            self._apply(node, RoundStart(round=1))

        outcome = RunOutcome.HORIZON_EXHAUSTED
        while self._queue:
            if not self._uncommitted:
                outcome = RunOutcome.COMMITTED
                break
            time = self._queue[0][0]
            if time > horizon.max_time or self.events_processed >= horizon.max_events:
                break
            _, _, event = heapq.heappop(self._queue)
            self.now = time
            self.events_processed += 1
            self._process(event)
        else:
            if not self._uncommitted:
                outcome = RunOutcome.COMMITTED

        logger.info(
            f"Run finished: {outcome.value} at t={self.now} after {self.events_processed} events, "
            f"{len(self.records)} trace records"
        )
        metadata = TraceMetadata(
            scenario=self.scenario,
            n=self.n,
            faulty=sorted(self.faulty),
            adversary_id=self.scenario.adversary.adversary_id,
            outcome=outcome,
            end_time=self.now,
            events_processed=self.events_processed,
        )
        return Trace(metadata, self.records)

    def schedule_message(self, message: Message, sender: int, delays: dict[int, int]) -> None:
        """
        Put one message in flight to each recipient in `delays`.

        Raises:
            DelayBoundViolation: a delay is below 1, or exceeds delta after GST
                on an edge between non-faulty nodes
        """
        after_gst = self.now >= self.delays.gst
        for recipient, delay in delays.items():
            if delay < 1:
                raise DelayBoundViolation(f"t={self.now}: delay {delay} on {sender}->{recipient} is below 1")
            if (
                after_gst
                and delay > self.delays.delta
                and sender not in self.faulty
                and recipient not in self.faulty
            ):
                raise DelayBoundViolation(
                    f"t={self.now}: delay {delay} on {sender}->{recipient} exceeds delta={self.delays.delta} after GST"
                )
            deliver_at = self.now + delay
            self.records.append(MessageSent(
                time=self.now, sender=sender, recipient=recipient, deliver_at=deliver_at, message=message,
            ))
            self._push(deliver_at, Deliver(message=message, sender=sender, recipient=recipient, sent_at=self.now))

    def arm_timer(self, node: int, timer: TimerKind, round: int, duration: int) -> None:
        if duration <= 0:
            raise ValueError(f"Timer duration must be positive, got {duration}")
        fires_at = self.now + duration
        self.records.append(TimerArmed(time=self.now, node=node, timer=timer, round=round, fires_at=fires_at))
        self._push(fires_at, TimerFire(node=node, timer=timer, round=round))

    def _push(self, time: int, event: SimEvent) -> None:
        heapq.heappush(self._queue, (time, self._seq, event))
        self._seq += 1

    def _delay(self, sender: int, recipient: int, message: Message) -> int:
        edge = (sender, recipient)
        if self.now < self.delays.gst:
            return pre_gst_delays(edge, self.now, self.scenario.seed, self.network, message)
        return post_gst_delay(edge, self.now, self.scenario.seed, self.network, self.delays.delta, message)

    def _process(self, event: SimEvent) -> None:
        if logger.isEnabledFor(logging.DEBUG):
            logger.debug(f"t={self.now} {type(event).__name__} {event.model_dump(exclude={'message'})}")
        if isinstance(event, Deliver):
            self.records.append(MessageDelivered(
                time=self.now, sender=event.sender, recipient=event.recipient,
                sent_at=event.sent_at, message=event.message,
            ))
            if event.message.kind == "proposal":
                node_event = ProposalReceived(proposal=event.message)
            else:
                node_event = VoteReceived(vote=event.message)
            self._apply(event.recipient, node_event)
        else:
            self.records.append(TimerFired(time=self.now, node=event.node, timer=event.timer, round=event.round))
            if event.timer == TimerKind.VOTE:
                node_event = VoteTimeout(round=event.round)
            else:
                node_event = CommitTimeout(round=event.round)
            self._apply(event.node, node_event)

    def _apply(self, node: int, event: NodeEvent) -> None:
        if node in self.faulty:
            strategy = self.scenario.adversary.nodes[node]
            if strategy_registry.get_handler(strategy.kind).is_silenced(strategy, self.now):
                return
        state, output = step(self._states[node], event, self.cfg, self.registry)
        self._states[node] = state
        self._dispatch(node, output)

    def _dispatch(self, node: int, output: NodeOutput) -> None:
        if output.entered_round is not None:
            self.records.append(RoundEntered(time=self.now, node=node, round=output.entered_round))
        for rejection in output.rejections:
            self.records.append(ProposalRejected(
                time=self.now, node=node, round=rejection.round,
                proposer=rejection.sender, reason=rejection.reason,
            ))

        if node in self.faulty:
            ctx = AdversaryContext(
                node=node, time=self.now, state=self._states[node], cfg=self.cfg,
                faulty=self.faulty, registry=self.registry,
            )
            outbound = apply_node_strategy(output, self.scenario.adversary.nodes[node], ctx)
        else:
            outbound = broadcast(output.outgoing, self.n)
            for message in output.outgoing:
                if message.kind == "vote":
                    self.registry.register(message)

        for item in outbound:
            message = item.message
            record_type = Voted if message.kind == "vote" else Proposed
            self.records.append(record_type(
                time=self.now, node=node, round=message.round,
                value=message.value, recipients=list(item.recipients),
            ))
            delays = {dst: self._delay(node, dst, message) for dst in item.recipients}
            self.schedule_message(message, node, delays)

        for timer in output.timers:
            self.arm_timer(node, timer.kind, timer.round, timer.duration)

        if output.committed_now is not None:
            self.records.append(Committed(
                time=self.now, node=node, round=self._states[node].commit_round, value=output.committed_now,
            ))
            self._uncommitted.discard(node)
            logger.debug(f"t={self.now} node {node} committed {output.committed_now}")


def run(scenario: ScenarioConfig) -> Trace:
    """Simulate `scenario` and return its trace."""
    return Simulation(scenario).run()
