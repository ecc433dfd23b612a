"""Exception hierarchy.

Every error carries a ``category`` used by the command line to print a single
machine-parseable line on failure.
"""


class CensNBError(Exception):
    category = "Error"


class NoEvents(CensNBError, ValueError):
    category = "NoEvents"


class NoNonEvents(CensNBError, ValueError):
    category = "NoNonEvents"


class BadIndex(CensNBError, IndexError):
    category = "BadIndex"


class InsufficientData(CensNBError, ValueError):
    category = "InsufficientData"


class DimensionMismatch(CensNBError, ValueError):
    category = "DimensionMismatch"


class LengthMismatch(CensNBError, ValueError):
    category = "LengthMismatch"


class TooFew(CensNBError, ValueError):
    category = "TooFew"


class NotConverged(CensNBError, RuntimeError):
    category = "NotConverged"


class SingularInformation(CensNBError, ValueError):
    category = "SingularInformation"


class FormatError(CensNBError, ValueError):
    category = "FormatError"


class BadRho(CensNBError, ValueError):
    category = "BadRho"


class UnknownVariant(CensNBError, ValueError):
    category = "UnknownVariant"


class EmptySubsetKM(CensNBError, ValueError):
    category = "EmptySubsetKM"


class MissingColumn(CensNBError, ValueError):
    category = "MissingColumn"


class UnparseableCell(CensNBError, ValueError):
    category = "UnparseableCell"


class SchemaMismatch(CensNBError, ValueError):
    category = "SchemaMismatch"


class UsageError(CensNBError, ValueError):
    category = "UsageError"
