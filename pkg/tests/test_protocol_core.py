"""
Tests for the replica state machine
"""
import pytest

from app.protocol.models import (
    EMPTY,
    CommitTimeout,
    Lockset,
    Mutation,
    ProposalMessage,
    ProposalReceived,
    ProtocolConfig,
    RejectionReason,
    RoundStart,
    TimerKind,
    Value,
    VoteMessage,
    VoteReceived,
    VoteTimeout,
)
from app.protocol.replica import (
    advance_round,
    initial_state,
    make_proposal,
    on_vote_timeout,
    record_vote,
    step,
    try_commit,
)
from tests.conftest import AlwaysGenuine


def started(node: int, cfg: ProtocolConfig, genuine=None):
    genuine = genuine or AlwaysGenuine()
    state = initial_state(node, Value(payload=f"v{node}"), cfg)
    return step(state, RoundStart(round=1), cfg, genuine)


def vote(round: int, payload: str | None, sender: int) -> VoteMessage:
    return VoteMessage(round=round, value=Value(payload=payload), sender=sender)


def lockset(round: int, payloads: list[str | None]) -> Lockset:
    return Lockset(round=round, votes={i: vote(round, p, i) for i, p in enumerate(payloads)})


class TestRoundStart:
    """Round entry, proposals and timers"""

    def setup_method(self):
        self.cfg = ProtocolConfig.for_faults(1)

    def test_initial_state_rejects_empty_value(self):
        """Test that a node cannot start with the Empty value"""
        with pytest.raises(ValueError):
            initial_state(0, EMPTY, self.cfg)

    def test_leader_proposes_initial_value_in_round_one(self):
        """Test the round-1 leader proposes its own value with an empty justification"""
        _, output = started(0, self.cfg)

        assert output.entered_round == 1
        assert len(output.outgoing) == 1
        proposal = output.outgoing[0]
        assert proposal.kind == "proposal"
        assert proposal.value == Value(payload="v0")
        assert proposal.justification.round == 0
        assert len(proposal.justification) == 0

    def test_non_leader_arms_timers_only(self):
        """Test a non-leader arms both timers and sends nothing"""
        _, output = started(3, self.cfg)

        assert output.outgoing == []
        timers = {(t.kind, t.duration) for t in output.timers}
        assert timers == {(TimerKind.VOTE, 10), (TimerKind.COMMIT, 30)}

    def test_round_start_for_other_round_is_ignored(self):
        """Test that a stale RoundStart does nothing"""
        state, _ = started(2, self.cfg)
        new_state, output = step(state, RoundStart(round=4), self.cfg, AlwaysGenuine())
        assert new_state == state
        assert output.outgoing == [] and output.timers == []


class TestVoting:
    """Vote step"""

    def setup_method(self):
        self.cfg = ProtocolConfig.for_faults(1)
        self.genuine = AlwaysGenuine()
        self.proposal = ProposalMessage(round=1, value=Value(payload="v0"), sender=0)

    def test_votes_for_valid_proposal(self):
        """Test a node votes for a valid round-1 proposal and records its own vote"""
        state, _ = started(2, self.cfg)
        state, output = step(state, ProposalReceived(proposal=self.proposal), self.cfg, self.genuine)

        assert output.outgoing == [vote(1, "v0", 2)]
        assert state.voted_this_round
        assert state.last_vote_value == Value(payload="v0")
        assert 2 in state.lockset(1).votes

    def test_votes_at_most_once_per_round(self):
        """Test a second valid proposal delivery does not produce a second vote"""
        state, _ = started(2, self.cfg)
        state, _ = step(state, ProposalReceived(proposal=self.proposal), self.cfg, self.genuine)
        _, output = step(state, ProposalReceived(proposal=self.proposal), self.cfg, self.genuine)
        assert output.outgoing == []

    def test_rejects_proposal_from_wrong_leader(self):
        """Test a proposal by a non-leader is rejected and not voted for"""
        state, _ = started(2, self.cfg)
        bogus = ProposalMessage(round=1, value=Value(payload="v3"), sender=3)
        state, output = step(state, ProposalReceived(proposal=bogus), self.cfg, self.genuine)

        assert output.outgoing == []
        assert output.rejections[0].reason == RejectionReason.WRONG_LEADER
        assert not state.voted_this_round

    def test_vote_timeout_in_round_one_votes_empty(self):
        """Test the round-1 vote timeout votes Empty"""
        state, _ = started(2, self.cfg)
        state, output = step(state, VoteTimeout(round=1), self.cfg, self.genuine)
        assert output.outgoing == [VoteMessage(round=1, value=EMPTY, sender=2)]

    def test_vote_timeout_repeats_previous_vote(self):
        """Test a later vote timeout repeats the previous round's vote"""
        state, _ = started(2, self.cfg)
        state, _ = step(state, ProposalReceived(proposal=self.proposal), self.cfg, self.genuine)
        state, _ = step(state, CommitTimeout(round=1), self.cfg, self.genuine)
        state, output = step(state, VoteTimeout(round=2), self.cfg, self.genuine)
        assert output.outgoing == [vote(2, "v0", 2)]

    def test_stale_vote_timeout_is_ignored(self):
        """Test a vote timer of an earlier round does nothing"""
        state, _ = started(2, self.cfg)
        state, _ = step(state, CommitTimeout(round=1), self.cfg, self.genuine)
        _, output = on_vote_timeout(state, self.cfg, round=1)
        assert output.outgoing == []

    def test_future_proposal_is_buffered_until_round_entry(self):
        """Test a proposal for the next round is voted on once the node gets there"""
        cfg = self.cfg
        state, _ = started(3, cfg)
        for sender in range(6):
            state = record_vote(state, vote(1, None, sender))
        early = ProposalMessage(round=2, value=Value(payload="v1"), sender=1, justification=lockset(1, [None] * 6))

        state, output = step(state, ProposalReceived(proposal=early), cfg, self.genuine)
        assert output.outgoing == []
        assert 2 in state.pending_proposals

        state, output = step(state, CommitTimeout(round=1), cfg, self.genuine)
        assert output.entered_round == 2
        assert vote(2, "v1", 3) in output.outgoing
        assert state.pending_proposals == {}


class TestLocksets:
    """Vote storage and retention"""

    def setup_method(self):
        self.cfg = ProtocolConfig.for_faults(1)

    def test_first_vote_per_sender_wins(self):
        """Test a second vote from the same sender in the same round is ignored"""
        state, _ = started(4, self.cfg)
        state = record_vote(state, vote(1, "a", 0))
        state = record_vote(state, vote(1, "b", 0))
        assert state.lockset(1).votes[0].value == Value(payload="a")

    def test_old_locksets_are_collected(self):
        """Test only the current and previous round are kept"""
        state, _ = started(4, self.cfg)
        state = record_vote(state, vote(1, "a", 0))
        state, _ = advance_round(state, self.cfg, AlwaysGenuine())
        state, _ = advance_round(state, self.cfg, AlwaysGenuine())
        assert state.current_round == 3
        assert 1 not in state.locksets

        state = record_vote(state, vote(1, "a", 1))
        assert 1 not in state.locksets

    def test_advance_round_doubles_timeouts(self):
        """Test timeouts double with every round"""
        state, _ = started(4, self.cfg)
        state, output = advance_round(state, self.cfg, AlwaysGenuine())

        assert output.round_advanced
        assert (state.to_vote, state.to_commit) == (20, 60)
        state, _ = advance_round(state, self.cfg, AlwaysGenuine())
        assert (state.to_vote, state.to_commit) == (40, 120)


class TestCommit:
    """Commit rule"""

    def setup_method(self):
        self.cfg = ProtocolConfig.for_faults(1)
        self.genuine = AlwaysGenuine()

    def test_commits_on_quorum_of_matching_votes(self):
        """Test 4f+1 votes for one value commit it, 4f do not"""
        state, _ = started(5, self.cfg)
        for sender in range(4):
            state, output = step(state, VoteReceived(vote=vote(1, "v0", sender)), self.cfg, self.genuine)
            assert output.committed_now is None
        state, output = step(state, VoteReceived(vote=vote(1, "v0", 4)), self.cfg, self.genuine)

        assert output.committed_now == Value(payload="v0")
        assert state.committed == Value(payload="v0")
        assert state.commit_round == 1

    def test_empty_value_is_never_committed(self):
        """Test unanimous Empty votes do not commit"""
        state, _ = started(5, self.cfg)
        for sender in range(6):
            state = record_vote(state, vote(1, None, sender))
        assert try_commit(state, self.cfg) is None

    def test_committed_node_keeps_voting(self):
        """Test a committed node still votes in later rounds"""
        state, _ = started(5, self.cfg)
        state, _ = step(state, ProposalReceived(proposal=ProposalMessage(round=1, value=Value(payload="v0"), sender=0)),
                        self.cfg, self.genuine)
        for sender in range(4):
            state, _ = step(state, VoteReceived(vote=vote(1, "v0", sender)), self.cfg, self.genuine)
        assert state.committed == Value(payload="v0")

        state, _ = step(state, CommitTimeout(round=1), self.cfg, self.genuine)
        _, output = step(state, VoteTimeout(round=2), self.cfg, self.genuine)
        assert output.outgoing == [vote(2, "v0", 5)]

    def test_commit_round_lockset_survives_collection(self):
        """Test the commit round's lockset is kept as evidence"""
        state, _ = started(5, self.cfg)
        for sender in range(5):
            state, _ = step(state, VoteReceived(vote=vote(1, "v0", sender)), self.cfg, self.genuine)
        for _ in range(3):
            state, _ = advance_round(state, self.cfg, self.genuine)
        assert 1 in state.locksets


class TestProposalChoice:
    """Leader's value selection"""

    def setup_method(self):
        self.cfg = ProtocolConfig.for_faults(1)

    def leader_with(self, payloads, cfg=None):
        cfg = cfg or self.cfg
        state, _ = started(1, cfg)
        for sender, payload in enumerate(payloads):
            state = record_vote(state, vote(1, payload, sender))
        state, output = advance_round(state, cfg, AlwaysGenuine())
        return state, output

    def test_smallest_qualifying_value_wins(self):
        """Test the leader picks the smallest value with 2f+1 support"""
        _, output = self.leader_with(["b", "b", "b", "a", "a", "a"])
        proposal = output.outgoing[0]
        assert proposal.value == Value(payload="a")
        assert proposal.justification.round == 1

    def test_own_value_when_nothing_qualifies(self):
        """Test the leader falls back to its initial value"""
        _, output = self.leader_with(["a", "a", None, None, "b", "c"])
        assert output.outgoing[0].value == Value(payload="v1")

    def test_no_proposal_without_valid_lockset(self):
        """Test the leader stays silent with fewer than 4f+1 votes"""
        state, output = self.leader_with(["a", "a", "a", "a"])
        assert [m for m in output.outgoing if m.kind == "proposal"] == []
        assert make_proposal(state, self.cfg) is None

    def test_unconstrained_mutation_proposes_own_value(self):
        """Test the no_proposal_constraint mutation ignores the 2f+1 rule"""
        cfg = ProtocolConfig.for_faults(1, mutation=Mutation.NO_PROPOSAL_CONSTRAINT)
        _, output = self.leader_with(["a", "a", "a", "a", "a", None], cfg=cfg)
        assert output.outgoing[0].value == Value(payload="v1")


class TestMutations:
    """Deliberately broken protocol variants"""

    def test_weak_quorum_commits_on_three_f_plus_one(self):
        """Test the weak_commit_quorum mutation commits on 3f+1 votes"""
        cfg = ProtocolConfig.for_faults(1, mutation=Mutation.WEAK_COMMIT_QUORUM)
        state, _ = started(5, cfg)
        for sender in range(4):
            state, output = step(state, VoteReceived(vote=vote(1, "v0", sender)), cfg, AlwaysGenuine())
        assert output.committed_now == Value(payload="v0")

    def test_no_doubling_keeps_timeouts_constant(self):
        """Test the no_timeout_doubling mutation keeps round-1 timeouts"""
        cfg = ProtocolConfig.for_faults(1, mutation=Mutation.NO_TIMEOUT_DOUBLING)
        assert [cfg.to_vote(r) for r in (1, 2, 5)] == [10, 10, 10]
        assert cfg.round_entry_time(4) == 90

    def test_revote_initial_after_commit(self):
        """Test the revote mutation makes committed nodes vote their initial value"""
        cfg = ProtocolConfig.for_faults(1, mutation=Mutation.REVOTE_INITIAL_AFTER_COMMIT)
        state, _ = started(3, cfg)
        state, _ = step(state, ProposalReceived(proposal=ProposalMessage(round=1, value=Value(payload="v0"), sender=0)),
                        cfg, AlwaysGenuine())
        for sender in (0, 1, 2, 4):
            state, _ = step(state, VoteReceived(vote=vote(1, "v0", sender)), cfg, AlwaysGenuine())
        assert state.committed == Value(payload="v0")

        state, _ = step(state, CommitTimeout(round=1), cfg, AlwaysGenuine())
        _, output = step(state, VoteTimeout(round=2), cfg, AlwaysGenuine())
        assert output.outgoing == [vote(2, "v3", 3)]


class TestProtocolConfig:
    """Configuration invariants"""

    def test_node_count_must_be_five_f_plus_one(self):
        """Test n != 5f+1 is rejected"""
        with pytest.raises(ValueError):
            ProtocolConfig(f=1, n=7, to_vote_base=10, to_commit_base=30)

    def test_vote_timeout_must_precede_commit_timeout(self):
        """Test TO_vote >= TO_commit is rejected"""
        with pytest.raises(ValueError, match="TO_vote < TO_commit required"):
            ProtocolConfig.for_faults(1, to_vote_base=30, to_commit_base=30)

    def test_round_entry_times(self):
        """Test rounds start at the sum of earlier commit timeouts"""
        cfg = ProtocolConfig.for_faults(1)
        assert [cfg.round_entry_time(r) for r in (1, 2, 3, 4)] == [0, 30, 90, 210]
