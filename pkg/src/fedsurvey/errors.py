"""Exception hierarchy.

Every error belongs to one of three families so the CLI can map it to an
exit code: configuration (2), data (3) or runtime (4).
"""


class FedSurveyError(Exception):
    exit_code = 4


class ConfigError(FedSurveyError, ValueError):
    exit_code = 2


class InvalidConfig(ConfigError):
    pass


class InvalidSpec(ConfigError):
    pass


class DataError(FedSurveyError, ValueError):
    exit_code = 3


class MissingColumn(DataError):
    def __init__(self, name):
        super().__init__(f"missing column: {name!r}")
        self.name = name


class EmptyAfterFiltering(DataError):
    def __init__(self, site):
        super().__init__(f"site {site!r} has no complete rows")
        self.site = site


class BoundsViolation(DataError):
    def __init__(self, row, feature, value=None):
        super().__init__(f"row {row}: value {value!r} of {feature!r} outside declared bounds")
        self.row = row
        self.feature = feature


class SiteTooSmall(DataError):
    def __init__(self, site, n_site, k):
        super().__init__(f"site {site!r} has {n_site} rows, needs at least {k}")
        self.site = site
        self.n_site = n_site
        self.k = k


class OneClassOnly(DataError):
    def __init__(self, site=None):
        where = f" at site {site!r}" if site is not None else ""
        super().__init__(f"only one class present{where}")
        self.site = site


class DimensionMismatch(DataError):
    pass


class ModelError(FedSurveyError):
    pass


class DegenerateDesign(ModelError):
    pass


class InsufficientData(ModelError):
    pass


class FederationError(FedSurveyError):
    pass


class ClientFailure(FederationError):
    def __init__(self, client, reason=""):
        super().__init__(f"client {client!r} failed: {reason}" if reason else f"client {client!r} failed")
        self.client = client


class SchemaMismatch(FederationError):
    pass


class SerializationError(FederationError):
    pass


class StatsError(FedSurveyError, ValueError):
    pass


class ZeroVariance(StatsError):
    pass


class ConstantSample(StatsError):
    pass


class SizeOutOfRange(StatsError):
    pass


class DomainError(StatsError):
    pass
