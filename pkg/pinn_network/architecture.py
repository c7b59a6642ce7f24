"""Parser for architecture strings.

Grammar (whitespace ignored)::

    architecture := inputs "-" width ("-" width)* "-" tail
    inputs       := "(" name ("," name)* ")"
    tail         := outputs | "[" branch ("," branch)* "]"
    branch       := (width "-")* outputs
    outputs      := "(" name ("," name)* ")"

The first width is the feature (input) layer, the remaining widths form the
shared trunk. ``(x,t)-64-50-50-50-(u)`` therefore has a 64-wide feature layer,
a 50-50-50 trunk and one linear output ``u``; the bracketed form splits into one
branch per output group after the trunk.
"""
import re
from typing import List, Tuple

from pydantic import BaseModel, ConfigDict

from shared.errors import ConfigurationError

_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_HAT = "\u0302"


class BranchSpec(BaseModel):
    """Hidden widths of one output branch and the outputs it produces"""
    model_config = ConfigDict(frozen=True)

    name: str
    widths: Tuple[int, ...] = ()
    outputs: Tuple[str, ...]


class Architecture(BaseModel):
    model_config = ConfigDict(frozen=True)

    inputs: Tuple[str, ...]
    feature_width: int
    trunk: Tuple[int, ...]
    branches: Tuple[BranchSpec, ...]

    @property
    def outputs(self) -> Tuple[str, ...]:
        return tuple(name for branch in self.branches for name in branch.outputs)


def _names(group: str, text: str) -> Tuple[str, ...]:
    if not (group.startswith("(") and group.endswith(")")):
        raise ConfigurationError(f"Expected a parenthesised name list in '{text}'", value=group)
    names = tuple(part.replace(_HAT, "") for part in group[1:-1].split(","))
    for name in names:
        if not _NAME.match(name):
            raise ConfigurationError(f"Invalid name '{name}' in architecture '{text}'", value=name)
    return names


def _widths(parts: List[str], text: str) -> Tuple[int, ...]:
    widths = []
    for part in parts:
        if not part.isdigit() or int(part) < 1:
            raise ConfigurationError(
                f"Layer widths must be positive integers in '{text}'", field="architecture", value=part
            )
        widths.append(int(part))
    return tuple(widths)


def _split_top_level(body: str) -> List[str]:
    """Split on commas outside parentheses"""
    parts, depth, current = [], 0, ""
    for char in body:
        if char == "(":
            depth += 1
        elif char == ")":
            depth -= 1
        if char == "," and depth == 0:
            parts.append(current)
            current = ""
        else:
            current += char
    parts.append(current)
    return parts


def _branch(text: str, arch: str) -> BranchSpec:
    head, sep, outputs = text.rpartition("(")
    if not sep:
        raise ConfigurationError(f"Branch '{text}' has no output group in '{arch}'", value=text)
    head = head.rstrip("-")
    widths = _widths([w for w in head.split("-")] if head else [], arch)
    names = _names("(" + outputs, arch)
    return BranchSpec(name="_".join(names), widths=widths, outputs=names)


def parse_architecture(text: str) -> Architecture:
    """Parse an architecture string such as ``(x,t)-64-50-50-50-(u)``"""
    compact = re.sub(r"\s+", "", text)
    match = re.match(r"^(\([^)]*\))-(.*)$", compact)
    if not match:
        raise ConfigurationError(f"Architecture must start with an input group: '{text}'", value=text)
    inputs = _names(match.group(1), text)
    body = match.group(2)

    if body.endswith("]"):
        start = body.find("[")
        if start <= 0 or body[start - 1] != "-":
            raise ConfigurationError(f"Malformed branch list in '{text}'", value=text)
        hidden = body[: start - 1]
        branches = tuple(_branch(part, text) for part in _split_top_level(body[start + 1 : -1]))
    else:
        hidden, sep, outputs = body.rpartition("-(")
        if not sep:
            raise ConfigurationError(f"Architecture must end with an output group: '{text}'", value=text)
        names = _names("(" + outputs, text)
        branches = (BranchSpec(name="_".join(names), widths=(), outputs=names),)

    widths = _widths(hidden.split("-") if hidden else [], text)
    if not widths:
        raise ConfigurationError(f"Architecture needs at least a feature width: '{text}'", value=text)

    names = [name for branch in branches for name in branch.outputs]
    if len(set(names)) != len(names) or len({b.name for b in branches}) != len(branches):
        raise ConfigurationError(f"Duplicate output names in '{text}'", value=text)
    return Architecture(
        inputs=inputs, feature_width=widths[0], trunk=widths[1:], branches=branches
    )


def format_architecture(arch: Architecture) -> str:
    """Inverse of ``parse_architecture``"""
    head = "(" + ",".join(arch.inputs) + ")-" + "-".join(
        str(w) for w in (arch.feature_width,) + arch.trunk
    )

    def branch_text(branch: BranchSpec) -> str:
        prefix = "".join(f"{w}-" for w in branch.widths)
        return prefix + "(" + ",".join(branch.outputs) + ")"

    if len(arch.branches) == 1 and not arch.branches[0].widths:
        return head + "-" + branch_text(arch.branches[0])
    return head + "-[" + ",".join(branch_text(b) for b in arch.branches) + "]"
