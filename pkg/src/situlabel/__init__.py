"""situlabel: in-situ sensor-stream labelling, simulation, training, stats."""

from .stream import (
    ActivityLabel,
    CSV_HEADER,
    CsvParseError,
    LabelEvent,
    LabelledSample,
    SensorFrame,
    StreamBundle,
    StreamMeta,
    UNLABELLED,
    emit_csv,
    fuse,
    parse_csv,
    resample_hold,
)

__version__ = "0.1.0"

__all__ = [
    "ActivityLabel",
    "CSV_HEADER",
    "CsvParseError",
    "LabelEvent",
    "LabelledSample",
    "SensorFrame",
    "StreamBundle",
    "StreamMeta",
    "UNLABELLED",
    "emit_csv",
    "fuse",
    "parse_csv",
    "resample_hold",
    "__version__",
]
