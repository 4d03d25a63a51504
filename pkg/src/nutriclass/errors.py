"""Exception hierarchy shared by every module."""


class NutriclassError(Exception):
    """Base class for all package errors."""


class DomainError(NutriclassError, ValueError):
    """An argument lies outside the domain an operation is defined on."""


class SchemaError(DomainError):
    """Input data does not match the declared feature schema."""


class NumericError(NutriclassError, ArithmeticError):
    """A numerical routine failed to converge or produced non-finite values."""


class ReportVersionError(NutriclassError):
    """Run reports being compared do not share a schema version."""
