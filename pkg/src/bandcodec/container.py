"""The ``HIHA`` archive: byte layout, reading, writing and size accounting.

Everything is little-endian. An archive is::

    b"HIHA"  u16 version  u16 n_sections
    n_sections x ( u8 type  u32 length  u32 crc32(payload)  payload[length] )

Section types and payloads:

====  ========  ==============================================================
type  name      payload
====  ========  ==============================================================
0     header    UTF-8 JSON: shape, variable, units, thresholds, config echo
                and one record per frame (kind, normalisation, recorded RMSE)
1     sparse    u32 frame, then one CSR block (see ``sparse``)
2     net       u32 frame, u8 role, net
3     octree    u32 frame, f64 target, u32 budget, u8 max_depth, nodes
4     pyramid   u32 frame, u8 role, pyramid
5     chain     u32 n_frames, n_frames x u8 kind (0 full, 1 delta),
                retrain bitmap of ceil(n_frames / 8) bytes (bit t%8 of byte t//8)
====  ========  ==============================================================

A *net* is ``u8 n_widths, u16 widths[n], f64 omega_0, u8 storage`` (0 float32,
1 float16) followed by each layer's weight matrix (row-major, fan_in x
fan_out) and bias vector at that precision.

A *pyramid* is ``u8 upscale`` (0 query, 1 interp), ``u8 factors[3]``,
``u8 grid[3]``, ``f64 target``, ``u8 has_thumbnail``, [net], ``u8 n_blocks``,
``n_blocks x (u8 block_id, net)``, ``u8 n_unmet``, ``u8 unmet_ids[n]``.

Octree *nodes* are written depth-first in preorder. Each node is a state byte
(0 passed, 1 fitted, 2 redecomposed), a flag byte (bit 0 unmet, bit 1 has a
net, bit 2 has inner thresholds and sparse part), then the net if flagged,
then ``f64 omega, u32 n_c, u8 freq_unit`` and a CSR block over the node's
extent if flagged, then the children of a redecomposed node. Node bounds are
not stored; they follow from the grid shape and the fixed halving rule.
"""
from __future__ import annotations

import json
import math
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from . import octree, sparse
from .codec import CodecConfig, FrameArtifact
from .field import NormalizationParams
from .octree import NodeState, OctreeArtifact, OctreeNode
from .pyramid import PyramidArtifact
from .siren import SirenNetwork
from .spectral import FREQ_UNITS, BandThresholds
from .trc import NonFiniteFrameError, TemporalChain, TrcFrameArtifact, reconstruct_series

MAGIC = b"HIHA"
VERSION = 1
FILE_HEADER = struct.Struct("<4sHH")
SECTION_HEADER = struct.Struct("<BII")

HEADER, SPARSE, NET, OCTREE, PYRAMID, CHAIN = range(6)
SECTION_NAMES = {HEADER: "header", SPARSE: "sparse", NET: "net", OCTREE: "octree", PYRAMID: "pyramid", CHAIN: "chain"}

# roles of stand-alone networks
NET_HIGH, NET_LOW, NET_MID, NET_TRC_LOW = range(4)
FALLBACK_ROLES = {"high": NET_HIGH, "low": NET_LOW, "mid": NET_MID}
# roles of pyramids
PYR_LOW, PYR_TRC = range(2)
UPSCALE_CODES = {"query": 0, "interp": 1}

FULL, DELTA = 0, 1


class ArchiveError(ValueError):
    """Base class of every archive reading error."""


class BadMagicError(ArchiveError):
    pass


class VersionError(ArchiveError):
    pass


class ChecksumError(ArchiveError):
    pass


class TruncationError(ArchiveError):
    pass


class MalformedArchiveError(ArchiveError):
    pass


# -- low-level writers ---------------------------------------------------------


def net_to_bytes(net: SirenNetwork) -> bytes:
    widths = tuple(int(w) for w in net.widths)
    if len(widths) > 255 or max(widths) > 0xFFFF:
        raise ValueError(f"widths {widths} do not fit the net record")
    half = net.storage == "f16"
    dt = "<f2" if half else "<f4"
    parts = [struct.pack(f"<B{len(widths)}HdB", len(widths), *widths, float(net.omega_0), 1 if half else 0)]
    for w, b in zip(net.weights, net.biases):
        parts.append(np.ascontiguousarray(w, dtype=dt).tobytes())
        parts.append(np.ascontiguousarray(b, dtype=dt).tobytes())
    return b"".join(parts)


def pyramid_to_bytes(p: PyramidArtifact) -> bytes:
    parts = [
        struct.pack("<B3B3Bd", UPSCALE_CODES[p.upscale], *p.scale_per_axis, *p.block_grid, float(p.target_rmse)),
        struct.pack("<B", p.thumbnail_net is not None),
    ]
    if p.thumbnail_net is not None:
        parts.append(net_to_bytes(p.thumbnail_net))
    parts.append(struct.pack("<B", len(p.residual_blocks)))
    for bid in sorted(p.residual_blocks):
        parts.append(struct.pack("<B", bid))
        parts.append(net_to_bytes(p.residual_blocks[bid]))
    unmet = sorted(set(p.unmet_blocks))
    parts.append(struct.pack(f"<B{len(unmet)}B", len(unmet), *unmet))
    return b"".join(parts)


def _thresholds_to_bytes(t: BandThresholds) -> bytes:
    return struct.pack("<dIB", float(t.omega), int(t.n_c), FREQ_UNITS.index(t.freq_unit))


def _node_to_bytes(node: OctreeNode, out: list[bytes]) -> None:
    has_inner = node.inner_thresholds is not None and node.inner_sparse is not None
    flags = (1 if node.unmet else 0) | (2 if node.net is not None else 0) | (4 if has_inner else 0)
    out.append(struct.pack("<BB", int(node.state), flags))
    if node.net is not None:
        out.append(net_to_bytes(node.net))
    if has_inner:
        out.append(_thresholds_to_bytes(node.inner_thresholds))
        out.append(sparse.to_bytes(node.inner_sparse))
    for c in node.children:
        _node_to_bytes(c, out)


def octree_to_bytes(art: OctreeArtifact) -> bytes:
    out = [struct.pack("<dIB", float(art.target_rmse), int(art.step_budget), int(art.max_depth))]
    _node_to_bytes(art.root, out)
    return b"".join(out)


# -- low-level readers ---------------------------------------------------------


class _Reader:
    def __init__(self, data: bytes, where: str):
        self.data = memoryview(data)
        self.off = 0
        self.where = where

    def take(self, n: int) -> memoryview:
        if n < 0 or self.off + n > len(self.data):
            raise MalformedArchiveError(
                f"{self.where}: needs {n} bytes at offset {self.off}, only {len(self.data) - self.off} left"
            )
        out = self.data[self.off : self.off + n]
        self.off += n
        return out

    def unpack(self, fmt: str):
        s = struct.Struct(fmt)
        return s.unpack(self.take(s.size))

    def array(self, dtype: str, count: int) -> np.ndarray:
        item = np.dtype(dtype).itemsize
        out = np.frombuffer(self.take(item * count), dtype=dtype).astype(np.float32)
        if not np.all(np.isfinite(out)):
            raise MalformedArchiveError(f"{self.where}: non-finite value before offset {self.off}")
        return out

    def finite(self, fmt: str):
        values = self.unpack(fmt)
        for v in values:
            if isinstance(v, float) and not math.isfinite(v):
                raise MalformedArchiveError(f"{self.where}: non-finite value before offset {self.off}")
        return values

    def rest(self) -> bytes:
        return bytes(self.take(len(self.data) - self.off))

    def done(self) -> None:
        if self.off != len(self.data):
            raise MalformedArchiveError(f"{self.where}: {len(self.data) - self.off} unexpected trailing bytes")


def _read_net(r: _Reader) -> SirenNetwork:
    (n,) = r.unpack("<B")
    if n < 2:
        raise MalformedArchiveError(f"{r.where}: net has {n} widths")
    widths = r.unpack(f"<{n}H")
    if min(widths) < 1:
        raise MalformedArchiveError(f"{r.where}: zero layer width in {widths}")
    omega, storage = r.unpack("<dB")
    if storage not in (0, 1) or not math.isfinite(omega) or omega <= 0:
        raise MalformedArchiveError(f"{r.where}: bad net storage {storage} or omega {omega}")
    dt = "<f2" if storage else "<f4"
    weights, biases = [], []
    for a, b in zip(widths[:-1], widths[1:]):
        weights.append(r.array(dt, a * b).reshape(a, b))
        biases.append(r.array(dt, b))
    return SirenNetwork(tuple(widths), float(omega), weights, biases, "f16" if storage else "f32")


def _read_pyramid(r: _Reader, shape) -> PyramidArtifact:
    code, f0, f1, f2, g0, g1, g2, target, has_thumb = r.finite("<B3B3BdB")
    modes = {v: k for k, v in UPSCALE_CODES.items()}
    if code not in modes:
        raise MalformedArchiveError(f"{r.where}: unknown upscale code {code}")
    factors, grid = (f0, f1, f2), (g0, g1, g2)
    if min(factors) < 1 or min(grid) < 1:
        raise MalformedArchiveError(f"{r.where}: zero scale factor or block count")
    thumb = _read_net(r) if has_thumb else None
    (n_blocks,) = r.unpack("<B")
    blocks = {}
    for _ in range(n_blocks):
        (bid,) = r.unpack("<B")
        blocks[bid] = _read_net(r)
    (n_unmet,) = r.unpack("<B")
    unmet = list(r.unpack(f"<{n_unmet}B"))
    try:
        return PyramidArtifact(thumb, factors, grid, blocks, target, unmet, modes[code])
    except ValueError as exc:
        raise MalformedArchiveError(f"{r.where}: {exc}") from None


def _read_sparse(r: _Reader, shape) -> sparse.SparseHighBand:
    try:
        sb, used = sparse.from_bytes(bytes(r.data[r.off :]), shape)
    except sparse.MalformedSparseError as exc:
        raise MalformedArchiveError(f"{r.where}: {exc}") from None
    r.off += used
    return sb


def _read_node(r: _Reader, bounds, depth: int, max_depth: int) -> OctreeNode:
    state, flags = r.unpack("<BB")
    if state > 2 or flags > 7:
        raise MalformedArchiveError(f"{r.where}: bad node state {state} / flags {flags} at depth {depth}")
    if depth > max_depth:
        raise MalformedArchiveError(f"{r.where}: node deeper than max_depth {max_depth}")
    node = OctreeNode(bounds, depth, NodeState(state), unmet=bool(flags & 1))
    if flags & 2:
        node.net = _read_net(r)
    if flags & 4:
        omega, n_c, unit = r.finite("<dIB")
        if unit >= len(FREQ_UNITS):
            raise MalformedArchiveError(f"{r.where}: unknown frequency unit {unit}")
        try:
            node.inner_thresholds = BandThresholds(omega, n_c, FREQ_UNITS[unit])
        except ValueError as exc:
            raise MalformedArchiveError(f"{r.where}: {exc}") from None
        node.inner_sparse = _read_sparse(r, node.shape)
    if node.state == NodeState.REDECOMPOSED:
        node.children = [_read_node(r, cb, depth + 1, max_depth) for cb in octree.octants(bounds)]
    return node


def _read_octree(r: _Reader, shape) -> OctreeArtifact:
    target, budget, max_depth = r.finite("<dIB")
    root_bounds = tuple((0, int(n)) for n in shape)
    root = _read_node(r, root_bounds, 0, max_depth)
    return OctreeArtifact(root, target, budget, max_depth)


# -- archive -------------------------------------------------------------------


def _section(kind: int, payload: bytes) -> bytes:
    return SECTION_HEADER.pack(kind, len(payload), zlib.crc32(payload) & 0xFFFFFFFF) + payload


def _thresholds_json(t: BandThresholds) -> dict:
    return {"omega": t.omega, "n_c": t.n_c, "freq_unit": t.freq_unit}


# Settings that change how fast an archive is made but not its content.
_EXECUTION_ONLY = {"threads"}


def _config_echo(cfg: CodecConfig | None) -> dict:
    """Only the settings that differ from the defaults, to keep headers small."""
    if cfg is None:
        return {}
    mine, base = cfg.to_dict(), CodecConfig().to_dict()
    return {k: v for k, v in mine.items() if v != base[k] and k not in _EXECUTION_ONLY}


def _frame_record(art) -> dict:
    rec = {
        "kind": "full" if isinstance(art, FrameArtifact) else "delta",
        "norm": [art.norm.v_min, art.norm.v_max],
        "clim_id": art.norm.climatology_id,
        "clim_mean": art.clim_mean,
        "norm_rmse": None if math.isnan(art.norm_rmse) else art.norm_rmse,
    }
    if isinstance(art, TrcFrameArtifact):
        rec["low_factors"] = list(art.low_factors)
        rec["low_upscale"] = art.low_upscale
    else:
        rec["thresholds"] = _thresholds_json(art.thresholds)
    return rec


def serialize(chain: TemporalChain, meta: dict | None = None) -> bytes:
    """Deterministic archive bytes for ``chain``.

    ``meta`` may carry ``variable_name``, ``units`` and ``config`` (a
    :class:`CodecConfig` whose non-default settings are echoed in the header).
    """
    meta = dict(meta or {})
    if not chain.frames:
        raise ValueError("cannot serialise an empty chain")
    header = {
        "shape": list(chain.shape),
        "variable_name": meta.get("variable_name", "var"),
        "units": meta.get("units", ""),
        "config": _config_echo(meta.get("config")),
        "frames": [_frame_record(a) for a in chain.frames],
    }
    sections = [_section(HEADER, json.dumps(header, sort_keys=True, separators=(",", ":")).encode())]
    n = len(chain.frames)
    bitmap = bytearray((n + 7) // 8)
    for t in chain.retrain_markers:
        bitmap[t // 8] |= 1 << (t % 8)
    kinds = bytes(FULL if isinstance(a, FrameArtifact) else DELTA for a in chain.frames)
    sections.append(_section(CHAIN, struct.pack("<I", n) + kinds + bytes(bitmap)))
    for t, art in enumerate(chain.frames):
        sections += _frame_sections(t, art)
    body = b"".join(sections)
    return FILE_HEADER.pack(MAGIC, VERSION, len(sections)) + body


def _frame_sections(t: int, art) -> list[bytes]:
    idx = struct.pack("<I", t)
    out = []
    if art.sparse is not None:
        out.append(_section(SPARSE, idx + sparse.to_bytes(art.sparse)))
    if isinstance(art, FrameArtifact):
        for band in ("high", "low", "mid"):
            if band in art.fallback:
                out.append(_section(NET, idx + struct.pack("<B", FALLBACK_ROLES[band]) + net_to_bytes(art.fallback[band])))
        if art.mim is not None:
            out.append(_section(PYRAMID, idx + struct.pack("<B", PYR_LOW) + pyramid_to_bytes(art.mim)))
        if art.idm is not None:
            out.append(_section(OCTREE, idx + octree_to_bytes(art.idm)))
    else:
        out.append(_section(NET, idx + struct.pack("<B", NET_TRC_LOW) + net_to_bytes(art.low_net)))
        out.append(_section(PYRAMID, idx + struct.pack("<B", PYR_TRC) + pyramid_to_bytes(art.mid_residual)))
    return out


@dataclass
class SectionInfo:
    kind: int
    offset: int
    length: int
    payload: bytes

    @property
    def name(self) -> str:
        return SECTION_NAMES.get(self.kind, f"type{self.kind}")

    @property
    def total_bytes(self) -> int:
        return SECTION_HEADER.size + self.length


def read_sections(data: bytes) -> tuple[int, list[SectionInfo]]:
    """Split an archive into checked sections (magic, version, lengths, CRCs)."""
    data = bytes(data)
    if len(data) < FILE_HEADER.size:
        if MAGIC[: len(data)] != data[: len(MAGIC)]:
            raise BadMagicError(f"not a HIHA archive (starts with {data[:4]!r})")
        raise TruncationError(f"archive is {len(data)} bytes, shorter than the {FILE_HEADER.size}-byte file header")
    magic, version, n_sections = FILE_HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise BadMagicError(f"not a HIHA archive (magic {magic!r})")
    if version != VERSION:
        raise VersionError(f"archive version {version} is not supported (this reader handles {VERSION})")
    off = FILE_HEADER.size
    out = []
    for i in range(n_sections):
        if off + SECTION_HEADER.size > len(data):
            raise TruncationError(f"section {i} header at offset {off} is cut off ({len(data) - off} bytes left)")
        kind, length, crc = SECTION_HEADER.unpack_from(data, off)
        name = SECTION_NAMES.get(kind, f"type{kind}")
        start = off + SECTION_HEADER.size
        if start + length > len(data):
            raise TruncationError(
                f"section {i} ({name}) at offset {off} declares {length} bytes, only {len(data) - start} present"
            )
        payload = data[start : start + length]
        if zlib.crc32(payload) & 0xFFFFFFFF != crc:
            raise ChecksumError(f"section {i} ({name}) at offset {off}: CRC32 mismatch")
        if kind not in SECTION_NAMES:
            raise MalformedArchiveError(f"section {i} at offset {off}: unknown section type {kind}")
        out.append(SectionInfo(kind, off, length, payload))
        off = start + length
    if off != len(data):
        raise MalformedArchiveError(f"{len(data) - off} trailing bytes after section {n_sections - 1}")
    return version, out


def _parse_header(sec: SectionInfo) -> dict:
    try:
        h = json.loads(sec.payload.decode("utf-8"))
        shape = tuple(int(s) for s in h["shape"])
        if len(shape) != 3 or min(shape) < 1:
            raise ValueError(f"bad shape {shape}")
        if not isinstance(h["frames"], list) or not h["frames"]:
            raise ValueError("no frame records")
        h["shape"] = shape
        return h
    except (UnicodeDecodeError, ValueError, KeyError, TypeError) as exc:
        raise MalformedArchiveError(f"header section at offset {sec.offset}: {exc}") from None


def _norm_from(rec: dict) -> NormalizationParams:
    v_min, v_max = (float(v) for v in rec["norm"])
    if not (math.isfinite(v_min) and math.isfinite(v_max) and v_min <= v_max):
        raise MalformedArchiveError(f"bad normalisation range [{v_min}, {v_max}]")
    return NormalizationParams(v_min, v_max, rec.get("clim_id"))


def deserialize(data: bytes) -> tuple[TemporalChain, dict]:
    """Rebuild the chain; returns it with the parsed header dict."""
    _, sections = read_sections(data)
    if not sections or sections[0].kind != HEADER:
        raise MalformedArchiveError("first section must be the header")
    header = _parse_header(sections[0])
    shape = header["shape"]
    records = header["frames"]
    n = len(records)
    if len(sections) < 2 or sections[1].kind != CHAIN:
        raise MalformedArchiveError("second section must be the chain map")
    r = _Reader(sections[1].payload, f"chain section at offset {sections[1].offset}")
    (n_chain,) = r.unpack("<I")
    if n_chain != n:
        raise MalformedArchiveError(f"chain map lists {n_chain} frames, header {n}")
    kinds = list(r.take(n))
    bitmap = r.take((n + 7) // 8)
    r.done()
    markers = {t for t in range(n) if bitmap[t // 8] >> (t % 8) & 1}
    parts: list[dict] = [{"fallback": {}} for _ in range(n)]
    try:
        for sec in sections[2:]:
            _parse_frame_section(sec, shape, n, parts)
        frames = [_build_frame(t, kinds[t], records[t], parts[t], shape) for t in range(n)]
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ArchiveError):
            raise
        raise MalformedArchiveError(str(exc)) from None
    if kinds[0] != FULL:
        raise MalformedArchiveError("frame 0 must be a full frame")
    return TemporalChain(frames, markers), header


def _parse_frame_section(sec: SectionInfo, shape, n: int, parts: list[dict]) -> None:
    r = _Reader(sec.payload, f"{sec.name} section at offset {sec.offset}")
    (t,) = r.unpack("<I")
    if t >= n:
        raise MalformedArchiveError(f"{r.where}: frame {t} outside 0..{n - 1}")
    p = parts[t]

    def put(key, value):
        if key in p:
            raise MalformedArchiveError(f"{r.where}: duplicate {key} for frame {t}")
        p[key] = value

    if sec.kind == SPARSE:
        put("sparse", _read_sparse(r, shape))
    elif sec.kind == NET:
        (role,) = r.unpack("<B")
        net = _read_net(r)
        if role == NET_TRC_LOW:
            put("low_net", net)
        else:
            band = {v: k for k, v in FALLBACK_ROLES.items()}.get(role)
            if band is None or band in p["fallback"]:
                raise MalformedArchiveError(f"{r.where}: bad or repeated net role {role}")
            p["fallback"][band] = net
    elif sec.kind == PYRAMID:
        (role,) = r.unpack("<B")
        if role not in (PYR_LOW, PYR_TRC):
            raise MalformedArchiveError(f"{r.where}: unknown pyramid role {role}")
        put("mim" if role == PYR_LOW else "mid_residual", _read_pyramid(r, shape))
    elif sec.kind == OCTREE:
        put("idm", _read_octree(r, shape))
    else:
        raise MalformedArchiveError(f"{r.where}: unexpected section")
    r.done()


def _build_frame(t: int, kind: int, rec: dict, p: dict, shape):
    norm = _norm_from(rec)
    clim_mean = rec.get("clim_mean")
    if clim_mean is not None and not math.isfinite(float(clim_mean)):
        raise MalformedArchiveError(f"frame {t}: non-finite climatology mean")
    rmse = rec.get("norm_rmse")
    rmse = math.nan if rmse is None else float(rmse)
    if kind == FULL:
        if rec.get("kind") != "full" or "low_net" in p or "mid_residual" in p:
            raise MalformedArchiveError(f"frame {t}: inconsistent full-frame record")
        th = rec["thresholds"]
        thresholds = BandThresholds(float(th["omega"]), int(th["n_c"]), th["freq_unit"])
        return FrameArtifact(
            shape, t, norm, clim_mean, thresholds,
            p.get("sparse"), p.get("mim"), p.get("idm"), p["fallback"], rmse,
        )
    if kind == DELTA:
        if rec.get("kind") != "delta" or "low_net" not in p or "mid_residual" not in p:
            raise MalformedArchiveError(f"frame {t}: delta frame lacks its low net or residual pyramid")
        if p["fallback"] or "mim" in p or "idm" in p:
            raise MalformedArchiveError(f"frame {t}: delta frame carries full-frame sections")
        factors = tuple(int(v) for v in rec["low_factors"])
        if len(factors) != 3 or min(factors) < 1 or rec["low_upscale"] not in UPSCALE_CODES:
            raise MalformedArchiveError(f"frame {t}: bad low-band layout {factors} / {rec['low_upscale']!r}")
        return TrcFrameArtifact(
            shape, t, norm, clim_mean, p.get("sparse"), p["low_net"], factors,
            rec["low_upscale"], p["mid_residual"], rmse,
        )
    raise MalformedArchiveError(f"frame {t}: unknown frame kind {kind}")


def inspect(data: bytes) -> dict:
    """Per-module byte counts; the values sum to ``len(data)``.

    Framing (file header, section headers, header and chain sections) counts
    as ``container``. Delta-frame sections count as ``trc``; full-frame
    sections are split into ``ssm``, ``mim``, ``idm`` and ``global`` (the
    single networks used when a stage is switched off).
    """
    _, sections = read_sections(data)
    kinds = b""
    for sec in sections:
        if sec.kind == CHAIN:
            kinds = sec.payload[4 : 4 + struct.unpack_from("<I", sec.payload)[0]]
    shares = {"container": FILE_HEADER.size, "ssm": 0, "mim": 0, "idm": 0, "global": 0, "trc": 0}
    for sec in sections:
        if sec.kind in (HEADER, CHAIN):
            shares["container"] += sec.total_bytes
            continue
        t = struct.unpack_from("<I", sec.payload)[0]
        shares["container"] += SECTION_HEADER.size
        size = sec.length
        if t < len(kinds) and kinds[t] == DELTA:
            shares["trc"] += size
        elif sec.kind == SPARSE:
            shares["ssm"] += size
        elif sec.kind == PYRAMID:
            shares["mim"] += size
        elif sec.kind == OCTREE:
            shares["idm"] += size
        else:
            shares["global"] += size
    return shares


def compression_ratio(archive, frames) -> float:
    """Raw float32 bytes of ``frames`` over the archive size.

    ``archive`` is the archive bytes or their length; ``frames`` a list of
    fields or a ``(n_frames, voxels_per_frame)`` pair.
    """
    size = archive if isinstance(archive, int) else len(archive)
    if size <= 0:
        raise ValueError("zero-length archive")
    if isinstance(frames, tuple) and len(frames) == 2 and all(isinstance(v, int) for v in frames):
        n, voxels = frames
    else:
        frames = list(frames)
        n, voxels = len(frames), int(np.prod(frames[0].shape))
    return n * voxels * 4 / size


def decode(data: bytes, clim=None, n_frames: int | None = None):
    """Deserialize and reconstruct frames ``0 .. n_frames-1``; returns ``(fields, chain, header)``.

    Checksums cannot vouch for the numbers they cover. A frame that decodes
    to non-finite values therefore raises :class:`MalformedArchiveError`
    rather than coming back half-usable.
    """
    chain, header = deserialize(data)
    n = len(chain.frames) if n_frames is None else int(n_frames)
    if not 0 < n <= len(chain.frames):
        raise ValueError(f"can decode 1..{len(chain.frames)} frames, asked for {n}")
    with np.errstate(over="ignore", invalid="ignore"):
        try:
            fields = reconstruct_series(chain, clim=clim, n_frames=n)
        except NonFiniteFrameError as exc:
            raise MalformedArchiveError(str(exc)) from None
    return fields, chain, header


def write_archive(path, chain: TemporalChain, meta: dict | None = None) -> int:
    data = serialize(chain, meta)
    with open(path, "wb") as fh:
        fh.write(data)
    return len(data)


def read_archive(path) -> tuple[TemporalChain, dict]:
    with open(path, "rb") as fh:
        return deserialize(fh.read())
