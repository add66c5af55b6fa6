"""Exception types raised across the package."""


class TexGeoError(Exception):
    """Base class for all library errors."""


class ParseError(TexGeoError, ValueError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class EmptyMesh(TexGeoError, ValueError):
    pass


class DegenerateExtent(TexGeoError, ValueError):
    pass


class MissingUvs(TexGeoError, ValueError):
    pass


class ZeroArea(TexGeoError, ValueError):
    pass


class TargetExceedsInput(TexGeoError, ValueError):
    pass


class NotWatertight(TexGeoError, ValueError):
    pass


class EmptySurface(TexGeoError, ValueError):
    pass


class NoOccupiedSamples(TexGeoError, ValueError):
    pass


class InsufficientCandidates(TexGeoError, ValueError):
    pass


class NoSeedTexels(TexGeoError, ValueError):
    pass


class NonManifoldInput(TexGeoError, ValueError):
    pass


class TargetUnreachable(TexGeoError):
    """Decimation stopped above the requested face count.

    The partially decimated mesh is kept on ``mesh`` so callers can still use it.
    """

    def __init__(self, achieved, target, mesh=None):
        self.achieved = achieved
        self.target = target
        self.mesh = mesh
        super().__init__(
            f"no legal collapse left at {achieved} faces (target {target})")


class ShapeMismatch(TexGeoError, ValueError):
    pass


class TOutOfRange(TexGeoError, ValueError):
    pass


class NonPositiveVariance(TexGeoError, ValueError):
    pass
