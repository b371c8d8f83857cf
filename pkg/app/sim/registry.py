"""
Genuineness registry

Records every vote that was actually signed by its sender. Non-faulty nodes
sign only what the protocol makes them send; faulty nodes may sign anything
under their own id, never under someone else's.
"""
from app.protocol.models import VoteMessage


class GenuinenessRegistry:
    """Simulator-level stand-in for unforgeable signatures."""

    def __init__(self):
        self._signed: set[tuple[int, int, str | None]] = set()

    def register(self, vote: VoteMessage) -> None:
        self._signed.add(self._key(vote))

    def is_genuine(self, vote: VoteMessage) -> bool:
        return self._key(vote) in self._signed

    @staticmethod
    def _key(vote: VoteMessage) -> tuple[int, int, str | None]:
        return vote.sender, vote.round, vote.value.payload
