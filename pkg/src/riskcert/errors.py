"""Exception hierarchy shared by every module."""


class CertError(Exception):
    """Base class for all errors raised by riskcert."""


class MalformedFile(CertError):
    pass


class ShapeMismatch(CertError, ValueError):
    pass


class NegativeStd(CertError, ValueError):
    pass


class DimensionMismatch(CertError, ValueError):
    pass


class EmptyArch(CertError, ValueError):
    pass


class BadDimension(CertError, ValueError):
    pass


class OutOfRange(CertError, ValueError):
    pass


class SizeMismatch(CertError, ValueError):
    pass


class TooLarge(CertError, ValueError):
    pass


class UnboundedPolytope(CertError):
    pass


class NotConcave(CertError, ValueError):
    pass


class NotRepresentable(CertError):
    pass


class InfeasibleSupport(CertError):
    pass


class UnsupportedStructure(CertError, ValueError):
    pass


class ConfigError(CertError):
    pass
