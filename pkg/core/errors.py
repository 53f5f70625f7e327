"""
Errors - exception hierarchy shared by the parser, planner and harness
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence


@dataclass(frozen=True)
class Diagnostic:
    """One parser/grounder message with a source position."""

    message: str
    line: int = 0
    column: int = 0
    severity: str = "error"
    file: str = "<string>"

    def format(self) -> str:
        return f"{self.file}:{self.line}:{self.column}: {self.severity}: {self.message}"

    def __str__(self) -> str:
        return self.format()


class CollabError(Exception):
    """Base class for every error raised by this package."""


# ---------------------------------------------------------------- language

class RddlError(CollabError):
    """Error in a domain or instance file; carries diagnostics."""

    def __init__(self, message: str, diagnostics: Optional[Sequence[Diagnostic]] = None):
        super().__init__(message)
        self.diagnostics: List[Diagnostic] = list(diagnostics or [Diagnostic(message)])

    def format_diagnostics(self) -> str:
        return "\n".join(d.format() for d in self.diagnostics)


class RddlSyntaxError(RddlError):
    def __init__(self, message: str, diagnostics=None, expected: Sequence[str] = ()):
        super().__init__(message, diagnostics)
        self.expected = tuple(expected)


class RddlTypeError(RddlError):
    pass


class DuplicateDeclaration(RddlError):
    pass


class UnknownObject(RddlError):
    pass


class GoalUsesActionFluent(RddlError):
    pass


class EmptyGoal(RddlError):
    pass


class CombinatorialLimitExceeded(RddlError):
    pass


# ---------------------------------------------------------------- planning

class InapplicableAction(CollabError):
    pass


class UnreachableGoal(CollabError):
    pass


class NoApplicableAction(CollabError):
    pass


# ---------------------------------------------------------------- human model

class EmptyTrajectorySet(CollabError):
    pass


# ---------------------------------------------------------------- anticipation

class UnknownCurrentTask(CollabError):
    pass


class NoTemplateMatch(CollabError):
    pass


class PredictorUnavailable(CollabError):
    pass


class MalformedResponse(CollabError):
    pass


# ---------------------------------------------------------------- harness / cli

class AssetLoadError(CollabError):
    pass


class ConfigError(CollabError):
    pass
