"""Exception hierarchy.

Every error carries a stable ``code`` (the class name) and the process exit
code the CLI uses when it escapes a subcommand: 3 for IO/format problems,
4 for contract violations.
"""


class DentalmarksError(Exception):
    exit_code = 1

    @property
    def code(self) -> str:
        return type(self).__name__


class FormatError(DentalmarksError):
    exit_code = 3


class ContractError(DentalmarksError, ValueError):
    exit_code = 4


# file / format problems
class UnreadableFile(FormatError):
    pass


class IoError(FormatError):
    pass


class MalformedGeometry(FormatError):
    pass


class UnsupportedFormat(FormatError):
    pass


class WriteFailure(FormatError):
    pass


class MalformedJson(FormatError):
    pass


class UnknownClass(FormatError):
    pass


class NonFiniteCoordinate(FormatError):
    pass


class BadMagic(FormatError):
    pass


class VersionMismatch(FormatError):
    pass


class TruncatedFile(FormatError):
    pass


class VertexCountMismatch(FormatError):
    pass


# contract violations
class LengthMismatch(ContractError):
    pass


class ShapeMismatch(ContractError):
    pass


class VariantMismatch(ContractError):
    pass


class NonPositiveTau(ContractError):
    pass


class NonPositiveScale(ContractError):
    pass


class InvalidLattice(ContractError):
    pass


class NegativeThreshold(ContractError):
    pass


class EmptyThresholds(ContractError):
    pass


class EmptyDataset(ContractError):
    pass


class TooFewVertices(ContractError):
    pass


class InvalidParams(ContractError):
    pass


class VariantScaleMismatch(ContractError, UserWarning):
    """Threshold outside the value range of the map variant.

    Issued as a warning by default; raised when the caller asks for strict
    checking.
    """
