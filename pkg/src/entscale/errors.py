"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command line front end:
1 usage error, 2 data error, 3 numerical failure.
"""


class EntscaleError(Exception):
    exit_code = 2


class UsageError(EntscaleError):
    exit_code = 1


class DataError(EntscaleError, ValueError):
    exit_code = 2


class NumericalError(EntscaleError, ArithmeticError):
    exit_code = 3


# -- series -----------------------------------------------------------------

class ParseError(DataError):
    def __init__(self, row, column, cell=None):
        self.row = row
        self.column = column
        msg = f"row {row}, column {column}: cannot parse {cell!r} as a finite real"
        super().__init__(msg)


class EmptySeries(DataError):
    pass


class InvalidSeries(DataError):
    pass


class InvalidFactor(DataError):
    pass


class NegativeEta(DataError):
    pass


class SeriesTooShort(DataError):
    pass


# -- curves -----------------------------------------------------------------

class TooFewPoints(DataError):
    pass


class EmptyGrid(DataError):
    pass


class GridTooSmall(DataError):
    pass


class MissingOrder(DataError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class MisalignedClouds(DataError):
    pass


# -- fitting / decomposition ------------------------------------------------

class CurveTooShort(DataError):
    pass


class TooFewFits(DataError):
    pass


class WindowTooSmall(DataError):
    pass


class NoPlateau(NumericalError):
    pass


class NoUnitSlopeRange(NumericalError):
    pass


# -- models -----------------------------------------------------------------

class InvalidParams(DataError):
    pass


class NonStationaryParams(InvalidParams):
    pass


class NumericalBlowup(NumericalError):
    pass


class NotPositiveDefinite(NumericalError):
    pass
