"""
Bounded exhaustive exploration for f = 1

Before GST the adversary picks, per round, how many of the highest-id
non-faulty nodes receive the leader's proposal only after their vote timer
(c in 0..5) and which non-faulty node, if any, has its vote to the next
leader held back past the round's end. The next leader's own vote never
crosses the network, so it is not a choice. GST is placed at the start of
the round after the explored ones, so later rounds run synchronously.
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from itertools import product
from typing import Iterator

from pydantic import BaseModel, ConfigDict, Field

from app.adversary.models import AdversaryConfig, DelayRule, NetworkStrategy
from app.adversary.strategies import strategy_registry
from app.harness.scenario import CheckName, Horizon, ScenarioConfig
from app.protocol.models import Mutation
from app.protocol.validation import leader_of
from app.sim.simulator import run
from app.verifier.verifier import check_agreement, check_lock_in

logger = logging.getLogger(__name__)

DEFAULT_BUDGET = 100_000
EXPLORED_CHECKS = [CheckName.AGREEMENT, CheckName.LOCK_IN]
# smaller spaces are explored in-process
PARALLEL_THRESHOLD = 1_000


class SpaceTooLarge(ValueError):
    """The requested schedule space exceeds the exploration budget."""


class RoundChoice(BaseModel):
    model_config = ConfigDict(frozen=True)

    late_proposals: int = Field(ge=0, description="Highest-id non-faulty nodes whose proposal arrives late")
    late_vote_sender: int | None = Field(default=None, description="Node whose vote to the next leader is held back")


class Schedule(BaseModel):
    model_config = ConfigDict(frozen=True)

    split: int | None = Field(default=None, description="Equivocation split, when the adversary equivocates")
    rounds: tuple[RoundChoice, ...] = ()


class ScheduleFailure(BaseModel):
    schedule: Schedule
    failed_checks: list[str]
    details: list[str] = Field(default_factory=list)


class ExplorationReport(BaseModel):
    f: int
    rounds: int
    adversary: str
    faulty_node: int | None
    mutation: Mutation
    schedules_explored: int
    failures: list[ScheduleFailure] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def round_choices(honest: list[int], next_leader: int | None = None) -> list[RoundChoice]:
    senders: list[int | None] = [None, *(u for u in honest if u != next_leader)]
    return [
        RoundChoice(late_proposals=c, late_vote_sender=s)
        for c in range(len(honest) + 1)
        for s in senders
    ]


def _per_round_choices(rounds: int, honest: list[int], n: int) -> list[list[RoundChoice]]:
    return [round_choices(honest, leader_of(r + 1, n)) for r in range(1, rounds + 1)]


def count_schedules(rounds: int, honest: list[int], n: int, splits: list[int | None]) -> int:
    """Size of the schedule space without enumerating it."""
    size = len(splits)
    for choices in _per_round_choices(rounds, honest, n):
        size *= len(choices)
    return size


def enumerate_schedules(rounds: int, honest: list[int], n: int, splits: list[int | None]) -> Iterator[Schedule]:
    per_round = _per_round_choices(rounds, honest, n)
    for split in splits:
        for choice in product(*per_round):
            yield Schedule(split=split, rounds=choice)


def build_scenario(
    schedule: Schedule,
    rounds: int,
    adversary: str,
    faulty_node: int | None,
    mutation: Mutation = Mutation.NONE,
) -> ScenarioConfig:
    """Turn a schedule into a runnable scenario with scripted pre-GST delays."""
    base = ScenarioConfig(f=1, mutation=mutation)
    cfg = base.protocol_config()
    n = cfg.n
    honest = [u for u in range(n) if u != faulty_node]

    rules: list[DelayRule] = []
    for r, choice in enumerate(schedule.rounds, start=1):
        late = honest[len(honest) - choice.late_proposals:] if choice.late_proposals else []
        for dst in late:
            rules.append(DelayRule(kind="proposal", round=r, dst=dst, delay=cfg.to_vote(r) + 1))
        if choice.late_vote_sender is not None:
            rules.append(DelayRule(
                kind="vote", round=r, src=choice.late_vote_sender,
                dst=leader_of(r + 1, n), delay=cfg.to_commit(r),
            ))

    nodes = {}
    if faulty_node is not None and adversary != "none":
        strategy = {"kind": adversary}
        if adversary == "equivocate_votes" and schedule.split is not None:
            strategy["split"] = schedule.split
        nodes[faulty_node] = strategy

    return ScenarioConfig(
        f=1,
        gst=cfg.round_entry_time(rounds + 1),
        delta=1,
        mutation=mutation,
        horizon=Horizon(max_time=cfg.round_entry_time(rounds + 6), max_events=200_000),
        adversary=AdversaryConfig(nodes=nodes, network=NetworkStrategy(scripted=rules)),
        checks=EXPLORED_CHECKS,
    )


def _explore_one(scenario: ScenarioConfig) -> tuple[list[str], list[str]]:
    trace = run(scenario)
    failed, details = [], []
    for result in (check_agreement(trace), check_lock_in(trace)):
        if not result.passed:
            failed.append(result.name)
            details.append(result.detail)
    return failed, details


def explore_small_model(
    f: int = 1,
    rounds: int = 2,
    adversary: str = "equivocate_votes",
    faulty_node: int | None = None,
    mutation: Mutation = Mutation.NONE,
    splits: list[int] | None = None,
    budget: int = DEFAULT_BUDGET,
    workers: int = 1,
) -> ExplorationReport:
    """
    Enumerate every schedule of the bounded space and check agreement and
    lock-in on each.

    Args:
        f: Fault bound; only 1 is supported
        rounds: Number of adversarial rounds before GST
        adversary: Strategy kind of the faulty node, or "none"
        faulty_node: Faulty node id, defaults to n-1
        mutation: Protocol mutation to explore
        splits: Equivocation splits to try, defaults to the even split n // 2
        budget: Maximum number of schedules
        workers: Worker processes

    Returns:
        ExplorationReport listing every failing schedule

    Raises:
        SpaceTooLarge: the space exceeds `budget`
    """
    if f != 1:
        raise ValueError("exploration is bounded to f = 1")
    if rounds < 0:
        raise ValueError("rounds must be non-negative")
    n = 5 * f + 1
    if adversary != "none" and adversary not in strategy_registry.get_supported_strategies():
        raise ValueError(f"Unknown adversary: {adversary}")

    if adversary == "none":
        faulty_node = None
    elif faulty_node is None:
        faulty_node = n - 1
    honest = [u for u in range(n) if u != faulty_node]

    split_options: list[int | None] = [None]
    if adversary == "equivocate_votes":
        split_options = list(splits) if splits else [n // 2]

    size = count_schedules(rounds, honest, n, split_options)
    if size > budget:
        raise SpaceTooLarge(f"{size} schedules exceed the budget of {budget}")
    logger.info(f"Exploring {size} schedules: rounds={rounds} adversary={adversary} mutation={mutation.value}")

    schedules = list(enumerate_schedules(rounds, honest, n, split_options))
    scenarios = [build_scenario(s, rounds, adversary, faulty_node, mutation) for s in schedules]
    if workers > 1 and size > PARALLEL_THRESHOLD:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(_explore_one, scenarios, chunksize=64))
    else:
        results = []
        for i, scenario in enumerate(scenarios, start=1):
            results.append(_explore_one(scenario))
            if i % 1000 == 0:
                logger.info(f"Explored {i}/{size} schedules")

    failures = [
        ScheduleFailure(schedule=schedule, failed_checks=failed, details=details)
        for schedule, (failed, details) in zip(schedules, results)
        if failed
    ]
    if failures:
        logger.warning(f"{len(failures)} of {size} schedules violate safety")
    return ExplorationReport(
        f=f,
        rounds=rounds,
        adversary=adversary,
        faulty_node=faulty_node,
        mutation=mutation,
        schedules_explored=len(schedules),
        failures=failures,
    )
