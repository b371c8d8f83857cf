"""
Tests for lockset and proposal validity
"""
import pytest

from app.protocol.models import (
    EMPTY,
    Lockset,
    Mutation,
    ProposalMessage,
    ProtocolConfig,
    RejectionReason,
    Value,
    VoteMessage,
)
from app.protocol.validation import (
    choose_proposal_value,
    is_valid_lockset,
    leader_of,
    qualifying_values,
    validate_proposal,
)
from app.sim.registry import GenuinenessRegistry
from tests.conftest import AlwaysGenuine


def make_lockset(round: int, payloads: list[str | None]) -> Lockset:
    return Lockset(
        round=round,
        votes={i: VoteMessage(round=round, value=Value(payload=p), sender=i) for i, p in enumerate(payloads)},
    )


class TestLeaderSchedule:
    """Round-robin leader"""

    @pytest.mark.parametrize("round,expected", [(1, 0), (2, 1), (6, 5), (7, 0), (13, 0)])
    def test_round_robin(self, round, expected):
        """Test leaders rotate over all six nodes"""
        assert leader_of(round, 6) == expected


class TestLocksetValidity:
    """4f+1 distinct senders of the right round"""

    def setup_method(self):
        self.cfg = ProtocolConfig.for_faults(1)

    def test_quorum_of_votes_is_valid(self):
        """Test 5 votes of the expected round are valid"""
        assert is_valid_lockset(make_lockset(1, ["a"] * 5), 1, self.cfg)

    def test_short_lockset_is_invalid(self):
        """Test 4 votes are not enough"""
        assert not is_valid_lockset(make_lockset(1, ["a"] * 4), 1, self.cfg)

    def test_wrong_round_is_invalid(self):
        """Test a lockset of another round is rejected"""
        assert not is_valid_lockset(make_lockset(2, ["a"] * 6), 1, self.cfg)

    def test_mismatched_sender_key_is_invalid(self):
        """Test a vote filed under another sender's key is rejected"""
        ls = make_lockset(1, ["a"] * 5)
        votes = dict(ls.votes)
        votes[4] = VoteMessage(round=1, value=Value(payload="a"), sender=0)
        assert not is_valid_lockset(Lockset(round=1, votes=votes), 1, self.cfg)

    def test_qualifying_values_need_two_f_plus_one(self):
        """Test only values with 3 votes qualify, Empty never does"""
        ls = make_lockset(1, ["b", "b", "b", None, None, None])
        assert qualifying_values(ls, self.cfg) == [Value(payload="b")]

    def test_utf8_byte_order(self):
        """Test values are ordered by UTF-8 bytes"""
        ls = make_lockset(1, ["é", "é", "é", "z", "z", "z"])
        assert choose_proposal_value(ls, Value(payload="v1"), self.cfg) == Value(payload="z")


class TestValidateProposal:
    """Proposal validity clauses"""

    def setup_method(self):
        self.cfg = ProtocolConfig.for_faults(1)
        self.genuine = AlwaysGenuine()

    def test_valid_round_one_proposal(self):
        """Test a round-1 proposal by node 0 with no justification is valid"""
        p = ProposalMessage(round=1, value=Value(payload="x"), sender=0)
        assert validate_proposal(p, self.cfg, self.genuine) is None

    def test_round_one_with_votes_is_invalid(self):
        """Test a round-1 proposal must carry an empty justification"""
        p = ProposalMessage(round=1, value=Value(payload="x"), sender=0, justification=make_lockset(1, ["a"] * 5))
        assert validate_proposal(p, self.cfg, self.genuine) == RejectionReason.INVALID_LOCKSET

    @pytest.mark.parametrize("sender,value,payloads,reason", [
        (2, "a", ["a"] * 6, RejectionReason.WRONG_LEADER),
        (1, None, ["a"] * 6, RejectionReason.EMPTY_VALUE),
        (1, "a", ["a"] * 4, RejectionReason.INVALID_LOCKSET),
        (1, "c", ["a", "a", "a", "b", "b", None], RejectionReason.CONSTRAINT_VIOLATED),
    ])
    def test_each_clause(self, sender, value, payloads, reason):
        """Test each validity clause on its own"""
        p = ProposalMessage(round=2, value=Value(payload=value), sender=sender, justification=make_lockset(1, payloads))
        assert validate_proposal(p, self.cfg, self.genuine) == reason

    def test_constraint_allows_any_qualifying_value(self):
        """Test the larger of two qualifying values is still accepted"""
        p = ProposalMessage(round=2, value=Value(payload="b"), sender=1,
                            justification=make_lockset(1, ["a", "a", "a", "b", "b", "b"]))
        assert validate_proposal(p, self.cfg, self.genuine) is None

    def test_forged_vote_is_rejected(self):
        """Test a justification vote nobody signed is a forgery"""
        registry = GenuinenessRegistry()
        ls = make_lockset(1, ["a"] * 5)
        for v in list(ls.votes.values())[:4]:
            registry.register(v)
        p = ProposalMessage(round=2, value=Value(payload="a"), sender=1, justification=ls)
        assert validate_proposal(p, self.cfg, registry) == RejectionReason.FORGED_VOTE

        registry.register(ls.votes[4])
        assert validate_proposal(p, self.cfg, registry) is None

    def test_unconstrained_mutation_skips_constraint(self):
        """Test the no_proposal_constraint mutation accepts any value"""
        cfg = ProtocolConfig.for_faults(1, mutation=Mutation.NO_PROPOSAL_CONSTRAINT)
        p = ProposalMessage(round=2, value=Value(payload="c"), sender=1,
                            justification=make_lockset(1, ["a"] * 6))
        assert validate_proposal(p, cfg, self.genuine) is None

    def test_empty_constant(self):
        """Test the Empty value renders as the empty-set sign"""
        assert str(EMPTY) == "∅"
        assert EMPTY.is_empty
