"""
Command-line interface for running and checking consensus scenarios

Exit codes:
    0  every check passed
    1  safety failure (agreement, lock-in, weak validity) or unsafe exploration
    2  progress failure (liveness, two-step)
    3  bad scenario, impossible adversary schedule, or unusable trace
    4  inconclusive (horizon too short)
"""
import json
import logging
import os
import sys

import click
from pydantic import ValidationError

from app.adversary.strategies import UnforgeableViolation, strategy_registry
from app.config import settings
from app.harness.explorer import DEFAULT_BUDGET, SpaceTooLarge, explore_small_model
from app.harness.runner import batch, persist_run, replay_trace, run_scenario
from app.harness.scenario import ScenarioError, load_scenario
from app.protocol.models import Mutation
from app.sim.simulator import DelayBoundViolation
from app.sim.trace import Trace
from app.verifier.models import CheckStatus, Verdict
from app.verifier.verifier import PROGRESS_CHECKS, SAFETY_CHECKS, TraceVerifier

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_SAFETY = 1
EXIT_PROGRESS = 2
EXIT_CONFIG = 3
EXIT_INCONCLUSIVE = 4

CONFIG_ERRORS = (
    ScenarioError,
    ValidationError,
    DelayBoundViolation,
    UnforgeableViolation,
    SpaceTooLarge,
    FileNotFoundError,
    ValueError,
)

STATUS_EMOJI = {
    CheckStatus.PASS: "✅",
    CheckStatus.FAIL: "❌",
    CheckStatus.NOT_APPLICABLE: "➖",
    CheckStatus.INCONCLUSIVE: "⚠️",
}


def determine_exit_code(statuses: dict[str, CheckStatus]) -> int:
    """Map check statuses to the process exit code."""
    failed = {name for name, status in statuses.items() if status == CheckStatus.FAIL}
    if failed & set(SAFETY_CHECKS):
        return EXIT_SAFETY
    if failed & set(PROGRESS_CHECKS):
        return EXIT_PROGRESS
    if "network" in failed:
        return EXIT_CONFIG
    if any(status == CheckStatus.INCONCLUSIVE for status in statuses.values()):
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def parse_seed_range(text: str) -> list[int]:
    """Parse `A..B` (inclusive) or a comma-separated list of seeds."""
    text = text.strip()
    if ".." in text:
        start, _, end = text.partition("..")
        low, high = int(start), int(end)
        if high < low:
            raise ValueError(f"empty seed range {text}")
        return list(range(low, high + 1))
    return [int(part) for part in text.split(",") if part.strip()]


def format_verdict_text(verdict: Verdict) -> str:
    metrics = verdict.metrics
    output = [f"\n🔍 Seed {verdict.seed}, adversary {verdict.adversary_id}: {metrics.outcome} at t={metrics.end_time}\n"]
    for name, result in verdict.checks.items():
        emoji = STATUS_EMOJI[result.status]
        line = f"{emoji} {name}: {result.status.value}"
        if result.detail:
            line += f" ({result.detail})"
        output.append(line)
    output.append("")
    output.append(f"   Messages sent: {metrics.messages_sent}")
    if metrics.commit_rounds:
        rounds = sorted(set(metrics.commit_rounds.values()))
        output.append(f"   Commit rounds: {', '.join(str(r) for r in rounds)}")
    if metrics.rounds_without_proposal:
        output.append(f"   Rounds without proposal: {metrics.rounds_without_proposal}")
    return "\n".join(output)


@click.group()
@click.version_option(version=settings.APP_VERSION)
@click.option('--verbose', '-v', is_flag=True, help='Log every protocol step')
def cli(verbose: bool):
    """Two-step BFT consensus simulator - run, check and explore scenarios"""
    if verbose:
        logging.getLogger().setLevel(logging.DEBUG)


@cli.command()
@click.argument('scenario', type=click.Path(dir_okay=False))
@click.option('--seed', type=int, default=None, help='Override the scenario seed')
@click.option('--out', '-o', type=click.Path(file_okay=False), default=None,
              help='Directory for trace and verdict (default: OUTPUT_DIR)')
@click.option('--format', '-f', 'fmt', type=click.Choice(['json', 'text']), default='text', help='Output format')
def run(scenario: str, seed: int | None, out: str | None, fmt: str):
    """
    Simulate one scenario and check its trace.

    Example:
        python -m app.cli run scenarios/fault_free.scn --seed 7
    """
    try:
        config = load_scenario(scenario)
        if seed is not None:
            config = config.with_seed(seed)
        trace, verdict = run_scenario(config)
        persist_run(trace, verdict, out or settings.OUTPUT_DIR)
    except CONFIG_ERRORS as e:
        logger.error(f"Run failed: {e}")
        sys.exit(EXIT_CONFIG)

    click.echo(verdict.model_dump_json(indent=2) if fmt == 'json' else format_verdict_text(verdict))
    sys.exit(determine_exit_code({name: r.status for name, r in verdict.checks.items()}))


@cli.command(name='batch')
@click.argument('scenario', type=click.Path(dir_okay=False))
@click.option('--seeds', required=True, help='Seed range A..B (inclusive) or a list a,b,c')
@click.option('--workers', '-w', type=int, default=1, show_default=True, help='Worker processes')
@click.option('--format', '-f', 'fmt', type=click.Choice(['json', 'text']), default='text', help='Output format')
def batch_command(scenario: str, seeds: str, workers: int, fmt: str):
    """
    Run a scenario for many seeds and summarize the results.

    Example:
        python -m app.cli batch scenarios/campaign_equivocate.scn --seeds 0..999 --workers 8
    """
    try:
        config = load_scenario(scenario)
        summary = batch(config, parse_seed_range(seeds), workers=workers)
    except CONFIG_ERRORS as e:
        logger.error(f"Batch failed: {e}")
        sys.exit(EXIT_CONFIG)

    if fmt == 'json':
        click.echo(summary.model_dump_json(indent=2))
    else:
        output = [f"\n🔍 {summary.runs} run(s), adversary {summary.adversary_id}, {summary.reruns} re-run(s)\n"]
        for name, tally in summary.tallies.items():
            emoji = "❌" if tally.failed else ("⚠️" if tally.inconclusive else "✅")
            line = (f"{emoji} {name}: {tally.passed} pass, {tally.failed} fail, "
                    f"{tally.inconclusive} inconclusive, {tally.not_applicable} n/a")
            if tally.first_failing_seed is not None:
                line += f" (first failing seed {tally.first_failing_seed})"
            output.append(line)
        click.echo("\n".join(output))
    sys.exit(determine_exit_code(summary.statuses()))


@cli.command()
@click.argument('trace_path', type=click.Path(dir_okay=False))
@click.option('--format', '-f', 'fmt', type=click.Choice(['json', 'text']), default='text', help='Output format')
def check(trace_path: str, fmt: str):
    """Run every oracle on a saved trace."""
    try:
        trace = Trace.load(trace_path)
        verdict = TraceVerifier(checks=None).verify(trace)
    except CONFIG_ERRORS as e:
        logger.error(f"Cannot check {trace_path}: {e}")
        sys.exit(EXIT_CONFIG)

    click.echo(verdict.model_dump_json(indent=2) if fmt == 'json' else format_verdict_text(verdict))
    sys.exit(determine_exit_code({name: r.status for name, r in verdict.checks.items()}))


@cli.command()
@click.argument('trace_path', type=click.Path(dir_okay=False))
@click.option('--format', '-f', 'fmt', type=click.Choice(['json', 'text']), default='text', help='Output format')
def replay(trace_path: str, fmt: str):
    """Re-drive every non-faulty node from a saved trace and compare."""
    try:
        report = replay_trace(Trace.load(trace_path))
    except CONFIG_ERRORS as e:
        logger.error(f"Cannot replay {trace_path}: {e}")
        sys.exit(EXIT_CONFIG)

    if fmt == 'json':
        click.echo(report.model_dump_json(indent=2))
    else:
        output = []
        for node in report.nodes:
            emoji = "✅" if node.consistent else "❌"
            line = f"{emoji} node {node.node}: {node.events_replayed} events"
            if node.mismatches:
                line += f" ({'; '.join(node.mismatches)})"
            output.append(line)
        click.echo("\n".join(output))
    # a trace the state machine cannot reproduce is not a valid trace
    sys.exit(EXIT_OK if report.consistent else EXIT_CONFIG)


@cli.command()
@click.option('--f', 'faults', type=int, default=1, help='Fault bound (only 1 is supported)')
@click.option('--rounds', '-r', type=int, default=2, help='Adversarial rounds before GST')
@click.option('--adversary', '-a', default='equivocate_votes',
              type=click.Choice(['none', *strategy_registry.get_supported_strategies()]),
              help='Strategy of the faulty node')
@click.option('--faulty', type=int, default=None, help='Faulty node id (default: n-1)')
@click.option('--mutation', '-m', type=click.Choice([m.value for m in Mutation]), default='none',
              help='Protocol mutation')
@click.option('--split', 'splits', type=int, multiple=True, help='Equivocation split(s) to explore')
@click.option('--budget', type=int, default=DEFAULT_BUDGET, show_default=True, help='Maximum schedules')
@click.option('--workers', '-w', type=int, default=None, help='Worker processes (default: one per CPU)')
@click.option('--format', '-f', 'fmt', type=click.Choice(['json', 'text']), default='text', help='Output format')
def explore(faults: int, rounds: int, adversary: str, faulty: int | None, mutation: str,
            splits: tuple, budget: int, workers: int | None, fmt: str):
    """
    Exhaustively check agreement and lock-in over bounded schedules.

    Example:
        python -m app.cli explore --f 1 --rounds 2 --adversary equivocate_votes
    """
    try:
        report = explore_small_model(
            f=faults,
            rounds=rounds,
            adversary=adversary,
            faulty_node=faulty,
            mutation=Mutation(mutation),
            splits=list(splits) or None,
            budget=budget,
            workers=workers or os.cpu_count() or 1,
        )
    except CONFIG_ERRORS as e:
        logger.error(f"Exploration failed: {e}")
        sys.exit(EXIT_CONFIG)

    if fmt == 'json':
        click.echo(report.model_dump_json(indent=2))
    else:
        output = [f"\n🔍 Explored {report.schedules_explored} schedule(s), {report.rounds} round(s), "
                  f"adversary {report.adversary}, mutation {report.mutation.value}\n"]
        if report.passed:
            output.append("✅ agreement and lock_in hold on every schedule")
        for failure in report.failures[:10]:
            output.append(f"❌ {', '.join(failure.failed_checks)}: {json.dumps(failure.schedule.model_dump())}")
        if len(report.failures) > 10:
            output.append(f"   ... and {len(report.failures) - 10} more")
        click.echo("\n".join(output))
    sys.exit(EXIT_OK if report.passed else EXIT_SAFETY)


@cli.command()
def version():
    """Show version information"""
    click.echo(f"{settings.APP_NAME} v{settings.APP_VERSION}")
    click.echo(f"Strategies: {', '.join(strategy_registry.get_supported_strategies())}")
    click.echo(f"Mutations: {', '.join(m.value for m in Mutation)}")


if __name__ == '__main__':
    cli()
