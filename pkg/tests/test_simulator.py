"""
Tests for the discrete-event simulator and traces
"""
import pytest
from hypothesis import given, settings
from hypothesis.strategies import integers

from app.adversary.models import (
    AdversaryConfig,
    DelayRule,
    EquivocateVotesStrategy,
    MuteLeaderStrategy,
    NetworkStrategy,
    PostGstPolicy,
    PreGstPolicy,
)
from app.harness.scenario import Horizon, ScenarioConfig
from app.protocol.models import RejectionReason, Value
from app.sim.models import RunOutcome
from app.sim.simulator import DelayBoundViolation, Simulation, run
from app.sim.trace import (
    Committed,
    MessageSent,
    ProposalRejected,
    RoundEntered,
    TimerFired,
    Trace,
    Voted,
)
from app.verifier.metrics import MetricsCalculator


def hostile(seed: int) -> ScenarioConfig:
    return ScenarioConfig(
        f=1,
        gst=100,
        delta=5,
        seed=seed,
        adversary=AdversaryConfig(
            nodes={5: EquivocateVotesStrategy()},
            network=NetworkStrategy(pre_gst=PreGstPolicy.RANDOM, post_gst=PostGstPolicy.RANDOM),
        ),
    )


class TestFaultFreeRuns:
    """Synchronous runs without faults"""

    @pytest.mark.parametrize("f", [1, 2, 3])
    def test_commits_in_round_one_after_two_delays(self, f):
        """Test every node commits the leader's value at t=2 with n + n^2 messages"""
        trace = run(ScenarioConfig(f=f))
        n = 5 * f + 1
        commits = list(trace.of_type(Committed))

        assert trace.metadata.outcome == RunOutcome.COMMITTED
        assert sorted(c.node for c in commits) == list(range(n))
        assert all(c.round == 1 and c.time == 2 for c in commits)
        assert all(c.value == Value(payload="v0") for c in commits)
        assert sum(1 for _ in trace.of_type(MessageSent)) == n + n * n

    def test_run_stops_at_last_commit(self):
        """Test the simulation ends right after the last commit"""
        trace = run(ScenarioConfig(f=1))
        assert isinstance(trace.records[-1], Committed)
        assert trace.metadata.end_time == 2
        assert not list(trace.of_type(TimerFired))

    def test_trace_starts_with_round_entry(self):
        """Test the first record is node 0 entering round 1"""
        trace = run(ScenarioConfig(f=1))
        first = trace.records[0]
        assert isinstance(first, RoundEntered)
        assert (first.node, first.round, first.time) == (0, 1, 0)


class TestAdversarialRuns:
    """Runs with faulty nodes and scripted delays"""

    def test_crashed_leader(self, scenario):
        """Test a crashed round-1 leader delays the commit to round 2"""
        trace = run(scenario("crashed_leader"))
        commits = trace.honest(Committed)

        assert len(commits) == 5
        assert all(c.round == 2 and c.time == 32 for c in commits)
        assert all(c.value == Value(payload="v1") for c in commits)
        assert not [r for r in trace.records if getattr(r, "node", None) == 0 and isinstance(r, RoundEntered)]

        round_one_votes = [v for v in trace.honest(Voted) if v.round == 1]
        assert len(round_one_votes) == 5
        assert all(v.value == Value() for v in round_one_votes)

    def test_faulty_leader_commit(self, scenario):
        """Test nodes commit in a round whose leader never proposes"""
        trace = run(scenario("faulty_leader_commit"))
        commits = trace.honest(Committed)

        assert len(commits) == 5
        assert all(c.round == 2 and c.time == 51 for c in commits)
        assert all(c.value == Value(payload="v0") for c in commits)
        assert MetricsCalculator.rounds_without_proposal(trace) == [2]

    def test_short_lockset_is_rejected(self, scenario):
        """Test a one-vote-short justification is rejected and round 3 commits"""
        trace = run(scenario("invalid_lockset"))
        rejections = trace.honest(ProposalRejected)

        assert {r.node for r in rejections} == {0, 2, 3, 4, 5}
        assert all(r.round == 2 and r.reason == RejectionReason.INVALID_LOCKSET for r in rejections)
        commits = trace.honest(Committed)
        assert all(c.round == 3 and c.time == 92 for c in commits)

    def test_horizon_exhausted(self):
        """Test a run that cannot finish in time reports horizon_exhausted"""
        config = ScenarioConfig(
            f=1,
            horizon=Horizon(max_time=5),
            adversary=AdversaryConfig(nodes={0: {"kind": "crash", "from_time": 0}}),
        )
        trace = run(config)
        assert trace.metadata.outcome == RunOutcome.HORIZON_EXHAUSTED
        assert not list(trace.of_type(Committed))
        assert trace.metadata.end_time <= 5


class TestNetworkModel:
    """Partial synchrony enforcement"""

    def test_post_gst_delay_above_delta_is_rejected(self):
        """Test a schedule exceeding delta between non-faulty nodes after GST fails"""
        config = ScenarioConfig(
            f=1,
            adversary=AdversaryConfig(network=NetworkStrategy(scripted=[DelayRule(kind="proposal", delay=5)])),
        )
        with pytest.raises(DelayBoundViolation):
            run(config)

    def test_slow_edges_to_faulty_nodes_are_allowed(self):
        """Test the delay bound does not protect faulty recipients"""
        config = ScenarioConfig(
            f=1,
            adversary=AdversaryConfig(
                nodes={5: MuteLeaderStrategy()},
                network=NetworkStrategy(scripted=[DelayRule(dst=5, delay=50)]),
            ),
        )
        trace = run(config)
        assert trace.metadata.outcome == RunOutcome.COMMITTED

    def test_timer_durations_must_be_positive(self):
        """Test arming a zero-length timer is refused"""
        with pytest.raises(ValueError):
            Simulation(ScenarioConfig(f=1)).arm_timer(0, "vote_timeout", 1, 0)


class TestDeterminism:
    """Same scenario and seed, same trace"""

    @given(integers(min_value=0, max_value=10_000))
    @settings(max_examples=10, deadline=None)
    def test_same_seed_same_trace(self, seed):
        """Test two runs with one seed produce byte-identical traces"""
        assert run(hostile(seed)).serialize() == run(hostile(seed)).serialize()

    def test_seed_changes_the_schedule(self):
        """Test random pre-GST delays depend on the seed"""
        assert run(hostile(1)).serialize() != run(hostile(2)).serialize()

    def test_serialization_round_trip(self):
        """Test a trace survives serialize/deserialize unchanged"""
        text = run(hostile(3)).serialize()
        restored = Trace.deserialize(text)
        assert restored.serialize() == text
        assert restored.metadata.scenario == hostile(3)

    def test_save_and_load(self, tmp_path):
        """Test traces are written as JSON Lines with a metadata header"""
        trace = run(ScenarioConfig(f=1))
        path = trace.save(tmp_path / "trace.jsonl")
        lines = path.read_text().splitlines()

        assert '"record":"meta"' in lines[0]
        assert len(lines) == len(trace) + 1
        assert Trace.load(path).serialize() == trace.serialize()
