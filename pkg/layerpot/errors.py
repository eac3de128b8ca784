# Error classes shared by every layerpot module.
# Each one keeps the context a caller needs to decide what to do next
# (refine h, drop a chart, report the offending node) as attributes.


class LayerPotError(Exception):
    """Base class for all errors raised by layerpot."""
    pass


class DegenerateGradientError(LayerPotError):
    """The level-set gradient vanishes (surface under-resolved at this point)."""

    def __init__(self, message, point=None, gradient_norm=None):
        super().__init__(message)
        self.point = point
        self.gradient_norm = gradient_norm


class ProjectionError(LayerPotError):
    """Closest-point iteration did not converge."""

    def __init__(self, message, point=None, iterations=None, residual=None):
        super().__init__(message)
        self.point = point
        self.iterations = iterations
        self.residual = residual


class ChartConditionError(LayerPotError):
    """A Monge chart was requested where |n·e_k| < cos(theta)."""

    def __init__(self, message, point=None, axis=None, gamma=None):
        super().__init__(message)
        self.point = point
        self.axis = axis
        self.gamma = gamma


class RootRefinementError(LayerPotError):
    """Root refinement along a grid line failed to converge."""

    def __init__(self, message, axis=None, line=None, iterations=None):
        super().__init__(message)
        self.axis = axis
        self.line = line
        self.iterations = iterations


class InsufficientStencil(LayerPotError):
    """Too few chart nodes near a point to fit the local polynomial."""

    def __init__(self, message, chart=None, count=None):
        super().__init__(message)
        self.chart = chart
        self.count = count


class MissingGridValueError(LayerPotError):
    """Potential values are missing at nodes the grid extension needs."""

    def __init__(self, message, nodes=None):
        super().__init__(message)
        self.nodes = nodes


class UnsupportedKernelError(LayerPotError):
    """The requested kernel cannot be used with this summation backend."""

    def __init__(self, message, kernel=None):
        super().__init__(message)
        self.kernel = kernel


class ConfigurationError(LayerPotError):
    """Invalid configuration value (config.ini or command line)."""

    def __init__(self, message, key=None, value=None):
        super().__init__(message)
        self.key = key
        self.value = value
