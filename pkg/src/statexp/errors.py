"""Exception hierarchy shared by all modules.

Structural problems (malformed inputs, missing table entries) are exceptions;
axiom failures are ordinary check results, never exceptions.
"""


class ToolkitError(Exception):
    """Base class for all errors raised by this package."""


class StructuralError(ToolkitError):
    """Input violates a structural precondition, distinct from an axiom failure."""


class UnknownLabelError(StructuralError):
    """A referenced label does not exist in the model."""


class IncompleteModelError(StructuralError):
    """A probability entry required by a check or construction is absent."""


class ValidationError(ToolkitError):
    """An operator invariant (hermiticity, positivity, trace, normalization) is violated."""


class DomainError(ToolkitError):
    """A scalar function is undefined on part of an operator's spectrum."""


class IntegrationError(ToolkitError):
    """A trajectory left the validated state space; usually means dt is too large."""
