"""Exception hierarchy shared across the toolchain."""


class TrafficSimError(Exception):
    """Base class for all toolchain errors."""


class InputError(TrafficSimError):
    """Invalid user input: bad documents, bad parameters, bad references.

    CLI maps this family to exit code 2.
    """


class ParseError(InputError):
    """Malformed input document (not even structurally readable)."""


class SchemaError(InputError):
    """Structurally readable document violating the expected schema."""


class BuildError(InputError):
    """Road-network compilation failure (unsnappable endpoints, dead junctions)."""


class NoRouteError(TrafficSimError):
    """Destination unreachable from origin in the lane graph."""


class MetricError(InputError):
    """Metric undefined for the given inputs (e.g. both matrices all-zero)."""


class RecorderError(TrafficSimError):
    """Output sink failed mid-run; partial output was marked."""
