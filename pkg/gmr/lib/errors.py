class GMRError(Exception):
    """
    Base class for every error raised by the gmr package.
    """

    exit_code = 1

    def __init__(self, message: str = "", **details):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self):
        """
        Machine-readable form written to error.json by the command line.
        """
        return {
            "error": type(self).__name__,
            "message": self.message,
            "exit_code": self.exit_code,
            "details": {key: str(value) for key, value in self.details.items()},
        }


class InputError(GMRError):
    exit_code = 2


class ComputationError(GMRError):
    exit_code = 1


class SchemaError(InputError):
    pass


class MissingValue(InputError):
    pass


class UnknownCategory(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class ConstantColumn(InputError):
    pass


class InvalidPenaltyCombination(InputError):
    pass


class InvalidFamily(InputError):
    pass


class EmptyCategory(InputError):
    pass


class DegenerateQuantification(ComputationError):
    pass


class SingularSystem(ComputationError):
    pass


class DegenerateSVD(ComputationError):
    pass


class NonDecreasingLoss(ComputationError):
    pass


class EmptyFeasibleSet(ComputationError):
    pass


class FitFailure(ComputationError):
    """
    A fit inside a cross-validation cell or simulation replicate failed;
    details["cause"] names the underlying error.
    """
