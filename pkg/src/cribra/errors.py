"""Exception hierarchy shared across the toolkit.

``ConfigError`` subclasses map to CLI exit code 1; everything else
derived from ``CribraError`` is treated as a per-item data failure.
"""


class CribraError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(CribraError):
    """Contract or configuration violation (exit code 1)."""


class DataError(CribraError):
    """Problem with a single input item (exit code 2 when partial)."""


# image_io
class UnreadableFile(DataError):
    pass


class UnsupportedPixelFormat(DataError):
    pass


class NonSquareTile(ConfigError):
    pass


class UpscaleRequested(ConfigError):
    pass


class InvalidTheta(ConfigError):
    pass


# segmentation / features
class DegenerateImage(DataError):
    pass


class EmptyInput(DataError):
    pass


class NoNuclei(DataError):
    pass


class TooFewPoints(DataError):
    pass


class DegenerateCollinear(DataError):
    pass


# classifiers
class SingleClassInput(ConfigError):
    pass


class NonFiniteFeature(DataError):
    pass


class DimensionMismatch(ConfigError):
    pass


class MissingEmbedding(DataError):
    def __init__(self, tile_id, path):
        super().__init__(f"tile {tile_id!r} missing from embedding file {path}")
        self.tile_id = tile_id
        self.path = path


class WidthMismatch(ConfigError):
    pass


class NonFiniteLoss(CribraError):
    pass


class ModelFormatError(ConfigError):
    pass


# evaluation
class PatientOverlap(ConfigError):
    def __init__(self, patients):
        self.patients = sorted(patients)
        super().__init__("patients assigned to more than one set: " + ", ".join(self.patients))


class UnassignedPatient(ConfigError):
    def __init__(self, patients):
        self.patients = sorted(patients)
        super().__init__("patients not assigned to any set: " + ", ".join(self.patients))


class InsufficientTiles(DataError):
    def __init__(self, role, label, available, needed):
        super().__init__(
            f"{role} split has {available} {label} tiles available, {needed} requested"
        )
        self.role = role
        self.label = label
        self.available = available
        self.needed = needed


# synthgen
class InfeasibleGeometry(ConfigError):
    pass
