"""Exception hierarchy shared across the package."""


class DivlabError(Exception):
    """Base class for all package errors."""


class DivergenceError(DivlabError, ValueError):
    """A tilted moment or MGF was requested at or beyond the convergence radius."""

    def __init__(self, s, radius, message=None):
        self.s = s
        self.radius = radius
        super().__init__(message or f"E(e^(sY)) diverges for s={s!r} >= mgf_radius={radius!r}")


class CapabilityError(DivlabError, NotImplementedError):
    """The closed-form route does not support the requested claim family."""


class StructuralError(DivlabError, ValueError):
    """A piecewise function was evaluated where it is not defined."""


class ConvergenceError(DivlabError, RuntimeError):
    """A numerical procedure did not reach its tolerance."""

    def __init__(self, message, diagnostics=None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class IncompleteBandError(ConvergenceError):
    """The band search ran past ``x_max`` without closing the last band."""


class InvalidBarrierError(DivlabError, ValueError):
    """A barrier at which the payoff normalization breaks down."""
