"""
Quorum arithmetic for n = 5f+1

Combinatorial facts the safety argument rests on, computed by enumeration
so they can be checked rather than assumed.
"""
from itertools import combinations


def commit_quorum(f: int) -> int:
    return 4 * f + 1


def min_quorum_intersection(f: int) -> int:
    """
    Smallest overlap of two 4f+1 quorums over 5f+1 nodes.

    By symmetry the first quorum is fixed to the lowest ids and only the
    second one is enumerated.
    """
    n = 5 * f + 1
    q = commit_quorum(f)
    first = set(range(q))
    return min(len(first.intersection(second)) for second in combinations(range(n), q))


def min_honest_intersection(f: int) -> int:
    """Overlap guaranteed to be non-faulty when up to f overlapping nodes are faulty."""
    return min_quorum_intersection(f) - f


def nodes_for_disjoint_quorums(f: int) -> int:
    """Nodes two disjoint 4f+1 quorums would need."""
    return 2 * commit_quorum(f)


def nodes_for_conflicting_commits(f: int) -> int:
    """
    Non-faulty nodes needed for two different values to each gather 4f+1
    votes in one round: two disjoint groups of 3f+1 non-faulty voters.
    """
    return 2 * (commit_quorum(f) - f)
