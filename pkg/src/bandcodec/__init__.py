"""Lossy neural compression of 3D atmospheric grids by frequency band.

A frame is split into low, mid and high FFT bands. The high band keeps its
largest values sparsely, the low band is fitted by a one-level pyramid of
sine-activated networks, and an octree of small networks fits the rest.
Series of frames reuse the previous frame's networks and code only the
change.
"""
from .codec import CodecConfig, FrameArtifact, compress_frame, reconstruct_frame
from .container import (
    ArchiveError,
    BadMagicError,
    ChecksumError,
    MalformedArchiveError,
    TruncationError,
    VersionError,
    compression_ratio,
    deserialize,
    read_archive,
    serialize,
    write_archive,
)
from .field import Climatology, GridField, NormalizationParams, build_coordinates, read_field, write_field
from .trc import TemporalChain, TrcFrameArtifact, compress_series, reconstruct_series

__all__ = [
    "ArchiveError",
    "BadMagicError",
    "ChecksumError",
    "Climatology",
    "CodecConfig",
    "FrameArtifact",
    "GridField",
    "MalformedArchiveError",
    "NormalizationParams",
    "TemporalChain",
    "TrcFrameArtifact",
    "TruncationError",
    "VersionError",
    "build_coordinates",
    "compress_frame",
    "compress_series",
    "compression_ratio",
    "deserialize",
    "read_archive",
    "read_field",
    "reconstruct_frame",
    "reconstruct_series",
    "serialize",
    "write_archive",
    "write_field",
]
