"""Exception hierarchy shared by the library and the CLI.

Every error carries the process exit code the CLI uses for it:
    1: usage or configuration
    2: data (bad SMILES or files, invalid molecules)
    3: numeric failure (divergence, undefined metric)
"""

from __future__ import annotations

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class MolGuideError(Exception):
    """Base class for all molguide errors."""

    exit_code = EXIT_DATA

    @property
    def error_class(self) -> str:
        return type(self).__name__


# ─── Usage ──────────────────────────────────────────────────────────


class ConfigError(MolGuideError):
    exit_code = EXIT_USAGE


# ─── Data ───────────────────────────────────────────────────────────


class SmilesError(MolGuideError):
    """A SMILES string could not be parsed.

    Attributes:
        position: 0-based character offset of the problem (or -1).
    """

    def __init__(self, message: str, position: int = -1):
        self.position = position
        if position >= 0:
            message = f"{message} (at position {position})"
        super().__init__(message)


class SmilesSyntaxError(SmilesError):
    pass


class UnsupportedElementError(SmilesError):
    pass


class UnclosedRingError(SmilesError):
    pass


class UnbalancedParenthesisError(SmilesError):
    pass


class UnsupportedFeatureError(SmilesError):
    """Charges, isotopes, stereo markers and atom classes."""


class InvalidMoleculeError(MolGuideError):
    def __init__(self, message: str, atoms: tuple[int, ...] = ()):
        self.atoms = atoms
        super().__init__(message)


class KekulizationError(InvalidMoleculeError):
    pass


class DatasetError(MolGuideError):
    pass


class CheckpointError(MolGuideError):
    pass


class FingerprintError(MolGuideError):
    pass


# ─── Numeric ────────────────────────────────────────────────────────


class NumericError(MolGuideError):
    exit_code = EXIT_NUMERIC


class TrainingDivergedError(NumericError):
    pass


class UndefinedMetricError(NumericError):
    pass
