"""Exception hierarchy for the exporter. Everything derives from ExporterError."""


class ExporterError(Exception):
    """Base class for all exporter failures."""


class ConfigError(ExporterError):
    """A job or encoder setting is invalid (bad fps, unknown encoder, ...)."""


class ManifestError(ExporterError):
    """The clip manifest is malformed or inconsistent."""


class MediaUnreadableError(ExporterError):
    """A media file cannot be opened, decoded, or covers too little time."""


class EncoderError(ExporterError):
    """The encoder failed or returned vectors of the wrong shape."""


class OutputError(ExporterError):
    """The embedding file cannot be written."""
