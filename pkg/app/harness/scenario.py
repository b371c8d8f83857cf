"""
Scenario configuration and its text format

A scenario file is a list of `key = value` lines. Keys are dotted paths into
ScenarioConfig, values are JSON literals; anything that is not valid JSON is
taken as a bare string. Lines starting with '#' are comments.

    f = 1
    gst = 40
    adversary.nodes.1 = {"kind": "mute_leader"}
    adversary.network.scripted = [{"kind": "vote", "round": 1, "delay": 39}]
"""
import json
import re
from enum import Enum
from pathlib import Path
from typing import Any

from pydantic import BaseModel, Field, ValidationError, model_validator

from app.adversary.models import AdversaryConfig, PostGstPolicy
from app.protocol.models import Mutation, ProtocolConfig, Value

_KEY_PATTERN = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*(\.[A-Za-z0-9_]+)*$")


class CheckName(str, Enum):
    AGREEMENT = "agreement"
    LOCK_IN = "lock_in"
    VALIDITY = "validity"
    TWO_STEP = "two_step"
    LIVENESS = "liveness"
    NETWORK = "network"


class Horizon(BaseModel):
    max_time: int = Field(default=50_000, gt=0, description="Last tick that may be processed")
    max_events: int = Field(default=500_000, gt=0, description="Maximum number of processed events")

    def doubled(self) -> "Horizon":
        return Horizon(max_time=self.max_time * 2, max_events=self.max_events * 2)


class ScenarioConfig(BaseModel):
    """
    Everything needed to reproduce one simulated run.
    """
    f: int = Field(default=1, ge=0, description="Fault bound; n = 5f+1")
    initial_values: list[str] | None = Field(default=None, description="One per node, defaults to v0..v{n-1}")
    to_vote_base: int = Field(default=10, gt=0)
    to_commit_base: int = Field(default=30, gt=0)
    gst: int = Field(default=0, ge=0, description="Global stabilization time")
    delta: int = Field(default=1, gt=0, description="Post-GST delay bound between non-faulty nodes")
    seed: int = 0
    horizon: Horizon = Field(default_factory=Horizon)
    adversary: AdversaryConfig = Field(default_factory=AdversaryConfig)
    mutation: Mutation = Mutation.NONE
    checks: list[CheckName] = Field(default_factory=lambda: list(CheckName))

    @model_validator(mode="after")
    def _check_scenario(self) -> "ScenarioConfig":
        n = self.n
        if self.to_vote_base >= self.to_commit_base:
            raise ValueError("TO_vote < TO_commit required")
        if self.initial_values is None:
            self.initial_values = [f"v{i}" for i in range(n)]
        if len(self.initial_values) != n:
            raise ValueError(f"initial_values must have n = {n} entries, got {len(self.initial_values)}")
        if any(value == "" for value in self.initial_values):
            raise ValueError("initial values must be non-empty")

        faulty = self.adversary.faulty_set
        if any(not 0 <= node < n for node in faulty):
            raise ValueError(f"faulty node ids must lie in [0, {n})")
        if len(faulty) > self.f:
            raise ValueError(f"fault bound exceeded: {len(faulty)} faulty nodes but f = {self.f}")

        network = self.adversary.network
        if network.post_gst == PostGstPolicy.FIXED and network.post_gst_delay > self.delta:
            raise ValueError(f"post_gst_delay {network.post_gst_delay} exceeds delta {self.delta}")
        for node, strategy in self.adversary.nodes.items():
            split = getattr(strategy, "split", None)
            if split is not None and split >= n:
                raise ValueError(f"node {node}: split must lie in [1, {n - 1}]")
        return self

    @property
    def n(self) -> int:
        return 5 * self.f + 1

    def initial_value(self, node: int) -> Value:
        return Value(payload=self.initial_values[node])

    def protocol_config(self) -> ProtocolConfig:
        return ProtocolConfig(
            f=self.f,
            n=self.n,
            to_vote_base=self.to_vote_base,
            to_commit_base=self.to_commit_base,
            mutation=self.mutation,
        )

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return self.model_copy(update={"seed": seed})


class ScenarioError(ValueError):
    """Scenario text could not be turned into a valid ScenarioConfig."""

    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("\n".join(errors))


def _parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _assign(data: dict, path: list[str], value: Any) -> None:
    target = data
    for part in path[:-1]:
        current = target.setdefault(part, {})
        if not isinstance(current, dict):
            raise KeyError(part)
        target = current
    leaf = path[-1]
    if isinstance(target.get(leaf), dict) and isinstance(value, dict):
        target[leaf] = {**value, **target[leaf]}
    else:
        target[leaf] = value


def _locate(loc: tuple, key_lines: dict[str, int]) -> int | None:
    parts = [str(p) for p in loc]
    while parts:
        line = key_lines.get(".".join(parts))
        if line is not None:
            return line
        parts.pop()
    return None


def parse_scenario(text: str) -> ScenarioConfig:
    """
    Parse scenario text into a validated ScenarioConfig.

    Args:
        text: Scenario file contents

    Returns:
        Validated scenario with defaults applied

    Raises:
        ScenarioError: on syntax errors or invalid values, with line numbers
            where the failing key can be traced back to a line
    """
    data: dict[str, Any] = {}
    key_lines: dict[str, int] = {}
    errors: list[str] = []

    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value'")
            continue
        key, _, raw_value = line.partition("=")
        key = key.strip()
        if not _KEY_PATTERN.match(key):
            errors.append(f"line {lineno}: invalid key '{key}'")
            continue
        if key in key_lines:
            errors.append(f"line {lineno}: duplicate key '{key}' (first set on line {key_lines[key]})")
            continue
        try:
            _assign(data, key.split("."), _parse_value(raw_value.strip()))
        except KeyError:
            errors.append(f"line {lineno}: '{key}' conflicts with an earlier scalar value")
            continue
        key_lines[key] = lineno

    if errors:
        raise ScenarioError(errors)

    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        messages = []
        for err in exc.errors():
            loc = ".".join(str(p) for p in err["loc"])
            msg = err["msg"].removeprefix("Value error, ")
            line = _locate(err["loc"], key_lines)
            if line is not None:
                messages.append(f"line {line}: {loc}: {msg}")
            elif loc:
                messages.append(f"{loc}: {msg}")
            else:
                messages.append(msg)
        raise ScenarioError(messages) from exc


def load_scenario(path: str | Path) -> ScenarioConfig:
    return parse_scenario(Path(path).read_text(encoding="utf-8"))


def _flatten(prefix: str, value: Any, lines: list[str]) -> None:
    # strategies stay inline; other objects become dotted keys
    if isinstance(value, dict) and value and "kind" not in value:
        for key, item in value.items():
            _flatten(f"{prefix}.{key}" if prefix else str(key), item, lines)
        return
    lines.append(f"{prefix} = {json.dumps(value, ensure_ascii=False)}")


def render_scenario(config: ScenarioConfig) -> str:
    """Render a scenario so that parse_scenario(render_scenario(c)) == c."""
    lines: list[str] = []
    _flatten("", config.model_dump(mode="json"), lines)
    return "\n".join(lines) + "\n"
