class OffsetError(Exception):
    pass


class InvalidDimensions(OffsetError, ValueError):
    pass


class LengthMismatch(OffsetError, ValueError):
    pass


class UnknownFeatureValue(OffsetError, KeyError):
    pass


class UnknownVariant(OffsetError, KeyError):
    pass


class InvalidCounts(OffsetError, ValueError):
    pass


class InvalidConfig(OffsetError, ValueError):
    pass


class UnorderedLog(OffsetError, ValueError):
    pass


class SchemaMismatch(OffsetError, ValueError):
    pass


class CorruptSnapshot(OffsetError, ValueError):
    pass


class EmptyInput(OffsetError, ValueError):
    pass
