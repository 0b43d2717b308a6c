"""Drive-index reading, sequence assembly, and the synthetic road generator."""

from .index import CAMERAS, COLUMNS, DriveIndex, IndexRow, load_index, split
from .sequences import FlowParams, SequenceSample, SequenceSet, make_sequences
from .synthetic import (
    TRACK_PRESETS,
    WHEELBASE_M,
    TrackSpec,
    generate_synthetic,
    parse_track,
    render_frame,
)

__all__ = [
    "CAMERAS",
    "COLUMNS",
    "DriveIndex",
    "FlowParams",
    "IndexRow",
    "SequenceSample",
    "SequenceSet",
    "TRACK_PRESETS",
    "TrackSpec",
    "WHEELBASE_M",
    "generate_synthetic",
    "load_index",
    "make_sequences",
    "parse_track",
    "render_frame",
    "split",
]
