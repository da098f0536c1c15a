"""Exception hierarchy shared by every fairmio module."""


class FairMioError(Exception):
    """Base class for all package errors."""


# dataset
class MissingColumn(FairMioError):
    pass


class NonBinaryLabel(FairMioError):
    def __init__(self, row: int, value):
        super().__init__(f"label at row {row} is not binary: {value!r}")
        self.row = row
        self.value = value


class ParseFailure(FairMioError):
    def __init__(self, row: int, column: str, value):
        super().__init__(f"cannot parse {value!r} in column {column!r} at row {row}")
        self.row = row
        self.column = column


class EmptyDataset(FairMioError):
    pass


class UnruledNumericProtected(FairMioError):
    def __init__(self, column: str):
        super().__init__(f"numeric protected column {column!r} has no discretization rule")
        self.column = column


# metrics / subgroups
class EmptyConditional(FairMioError):
    pass


class NoNegativeClass(FairMioError):
    pass


class EnumerationCapExceeded(FairMioError):
    pass


class DegenerateClassifier(FairMioError):
    pass


class IndexOutOfRange(FairMioError):
    pass


# milp
class Unbounded(FairMioError):
    pass


class MalformedModel(FairMioError):
    pass


class InfeasiblePoint(FairMioError):
    def __init__(self, tag: str, violation: float):
        super().__init__(f"constraint {tag!r} violated by {violation:.3g}")
        self.tag = tag
        self.violation = violation


class UnknownVariable(FairMioError):
    pass


class IoFailure(FairMioError):
    pass


# trainer
class SingleClassDataset(FairMioError):
    pass


class NonBinaryFeatures(FairMioError):
    pass


class VacuousCut(FairMioError):
    pass
