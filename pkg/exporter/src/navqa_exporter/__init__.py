"""Embedding exporter: turns clip media and query texts into NAVQ files."""

from .encoders import Encoder, HashEncoder, HttpEncoder, SwatchEncoder, make_encoder
from .errors import (
    ConfigError,
    EncoderError,
    ExporterError,
    ManifestError,
    MediaUnreadableError,
    OutputError,
)
from .export import ExportJob, ExportSummary, export_frames, export_query
from .format import normalize_rows, write_navq
from .frames import sample_clip_frames
from .manifest import ManifestEntry, load_manifest

__all__ = [
    "ConfigError",
    "Encoder",
    "EncoderError",
    "ExporterError",
    "ExportJob",
    "ExportSummary",
    "HashEncoder",
    "HttpEncoder",
    "ManifestEntry",
    "ManifestError",
    "MediaUnreadableError",
    "OutputError",
    "SwatchEncoder",
    "export_frames",
    "export_query",
    "load_manifest",
    "make_encoder",
    "normalize_rows",
    "sample_clip_frames",
    "write_navq",
]

__version__ = "0.1.0"
