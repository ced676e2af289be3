"""Exception hierarchy shared by all fedsim modules."""


class FedsimError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(FedsimError):
    """Invalid parameter, dimension mismatch, or unknown identifier."""


class DataError(FedsimError):
    """Dataset is empty, too small, or otherwise unusable."""


class FormatError(FedsimError):
    """A file does not conform to its declared binary or CSV format."""


class PartitionError(FedsimError):
    """The requested partition cannot be constructed from the dataset."""


class ProtocolError(FedsimError):
    """A strategy received updates that violate its round protocol."""


class CapacityError(FedsimError):
    """The requested computation exceeds a hard size limit."""
