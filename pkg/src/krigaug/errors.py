"""Exception hierarchy.

Every error carries a short machine-readable ``code`` that the CLI prints
on failure.
"""


class KrigAugError(Exception):
    code = "error"


class InputError(KrigAugError, ValueError):
    code = "input"


class InsufficientDataError(InputError):
    code = "insufficient_data"


class DuplicateRecordError(InputError):
    code = "duplicate_record"


class SchemaError(InputError):
    code = "schema"


class SingularSystemError(KrigAugError, ArithmeticError):
    code = "singular_system"


class ModelInconsistencyError(KrigAugError, ArithmeticError):
    code = "model_inconsistency"


class UndefinedCorrelationError(KrigAugError, ArithmeticError):
    code = "undefined_correlation"


class InsufficientPseudoError(InputError):
    code = "insufficient_pseudo"

    def __init__(self, message, available):
        super().__init__(message)
        self.available = available
