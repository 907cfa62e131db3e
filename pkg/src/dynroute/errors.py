class DynRouteError(Exception):
    pass


class ConfigurationError(DynRouteError, ValueError):
    pass


class GeometryError(DynRouteError, ValueError):
    pass


class DomainError(DynRouteError, ValueError):
    pass


class InstabilityError(DynRouteError, ValueError):
    """Arrival rate at or above the service rate of an M/M/1 queue."""


class StarvationError(DynRouteError, ValueError):
    """Traffic arrives at a node that has no service rate."""


class StructuralError(DynRouteError, ValueError):
    pass


class EnumerationCapError(DynRouteError, RuntimeError):
    pass


class ScenarioParseError(ConfigurationError):
    pass
