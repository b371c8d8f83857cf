"""
Adversarial delay schedules

Delays are pure functions of (seed, edge, send time) so a run is
reproducible from its seed alone.
"""
import random

from app.adversary.models import DelayRule, NetworkStrategy, PostGstPolicy, PreGstPolicy
from app.protocol.models import Message


def _draw(salt: str, seed: int, edge: tuple[int, int], send_time: int, low: int, high: int) -> int:
    src, dst = edge
    rng = random.Random(f"{salt}:{seed}:{src}:{dst}:{send_time}")
    return rng.randint(low, high)


def scripted_delay(
    rules: list[DelayRule],
    edge: tuple[int, int],
    send_time: int,
    message: Message | None = None,
) -> int | None:
    """Delay of the first rule matching this send, if any."""
    kind = message.kind if message is not None else None
    round = message.round if message is not None else None
    for rule in rules:
        if rule.matches(edge[0], edge[1], send_time, kind, round):
            return rule.delay
    return None


def pre_gst_delays(
    edge: tuple[int, int],
    send_time: int,
    seed: int,
    network: NetworkStrategy,
    message: Message | None = None,
) -> int:
    """
    Delay of a message sent before GST. Any value >= 1 is allowed.

    Args:
        edge: (sender, recipient)
        send_time: Tick the message is sent at
        seed: Scenario seed
        network: Adversary's network strategy
        message: Message being sent, used by scripted rules

    Returns:
        Delay in ticks
    """
    scripted = scripted_delay(network.scripted, edge, send_time, message)
    if scripted is not None:
        return scripted
    if network.pre_gst == PreGstPolicy.RANDOM:
        return _draw("pre", seed, edge, send_time, network.pre_gst_min, network.pre_gst_max)
    return network.pre_gst_delay


def post_gst_delay(
    edge: tuple[int, int],
    send_time: int,
    seed: int,
    network: NetworkStrategy,
    delta: int,
    message: Message | None = None,
) -> int:
    """
    Delay of a message sent at or after GST.

    The result is not clamped to delta; the simulator rejects schedules that
    exceed it between non-faulty nodes.
    """
    scripted = scripted_delay(network.scripted, edge, send_time, message)
    if scripted is not None:
        return scripted
    if network.post_gst == PostGstPolicy.RANDOM:
        return _draw("post", seed, edge, send_time, 1, delta)
    if network.post_gst == PostGstPolicy.MAX:
        return delta
    return network.post_gst_delay
