"""Exception types raised across the package."""


class GraphDartsError(Exception):
    pass


class ConfigurationError(GraphDartsError):
    """A referenced variable, parameter or setting is missing or invalid."""


class UsageError(GraphDartsError):
    """An API was called with arguments that violate its contract."""


class NumericOverflowError(GraphDartsError):
    def __init__(self, node_id, kind=None):
        self.node_id = node_id
        self.kind = kind
        super().__init__(f"non-finite value at tape node {node_id} ({kind})")
