"""Shared exception hierarchy.

Every error carries a category that the CLI maps to an exit code:
config -> 2, data -> 3, numeric -> 4, contract -> 5.
"""


class PatchflowError(Exception):
    category = "contract"


class ConfigError(PatchflowError):
    category = "config"


class DataError(PatchflowError):
    category = "data"


class NumericError(PatchflowError):
    category = "numeric"


class ContractError(PatchflowError):
    category = "contract"


class ShapeError(ContractError):
    """Dimension mismatch; message names the offending axis."""


class VocabularyError(ContractError):
    """Token index outside its declared range."""


class GeometryError(ContractError):
    """Image/grid dimensions incompatible with a patch layout."""


class PermutationError(ContractError):
    """Decode order is not a valid permutation of grid positions."""


class AlternationError(ContractError):
    """Pointer/content alternation violated in a serialized sequence."""


class CoverageError(ContractError):
    """A decode schedule does not cover every grid position."""


class ContextError(ContractError):
    """Sequence longer than the model context window."""


class RankError(NumericError):
    """Degenerate point configuration; message names the deficiency."""


class DegenerateDisparityError(NumericError):
    """Flow magnitudes too small to invert into depth."""


class PoisonedUpdateError(NumericError):
    """NaN/Inf gradient reached the optimizer; the step was refused."""


EXIT_CODES = {"ok": 0, "config": 2, "data": 3, "numeric": 4, "contract": 5}


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, PatchflowError):
        return EXIT_CODES[exc.category]
    return 1
