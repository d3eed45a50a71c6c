"""Wire protocol and persistence for records and trained models.

Frames are laid out as: 4-byte magic "EEGS", 1-byte kind, 4-byte little-endian
payload length, payload.  A stream is header, then markers and sample blocks in
sample order (each marker precedes the sample frame containing its index),
then end.  Sample values travel as 32-bit little-endian floats; markers and
indices are exact integers, so a round trip loses nothing but float precision.

Model files are versioned JSON with repr-exact floats.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import ChannelSet, EegRecord, StimulusEvent
from .features import EpochWindow

MAGIC = b"EEGS"
VERSION = (1, 0)  # (major, minor); readers reject larger majors

KIND_HEADER = 1
KIND_SAMPLES = 2
KIND_MARKER = 3
KIND_END = 4

_PREFIX = struct.Struct("<4sBI")
_MARKER = struct.Struct("<QBIIB")
_TARGET_UNKNOWN = 255

MODEL_FORMAT_VERSION = 1
DEFAULT_CHUNK = 128


class ProtocolError(ValueError):
    """Malformed bytes or a violated stream contract."""


class VersionError(ProtocolError):
    """Stream or file written by an incompatible (newer) major version."""


class IncompleteFrame(Exception):
    """Not an error: more bytes are needed to finish the current frame."""


class FormatError(ValueError):
    """Structurally invalid model file."""


@dataclass(frozen=True)
class HeaderFrame:
    channel_count: int
    rate: float
    labels: tuple[str, ...]
    version: tuple[int, int] = VERSION


@dataclass(frozen=True)
class SamplesFrame:
    first_sample_index: int
    samples: np.ndarray  # [k x channel_count] float32

    def __post_init__(self) -> None:
        samples = np.array(self.samples, dtype=np.float32, copy=True)
        if samples.ndim != 2:
            raise ValueError("samples block must be [k x channels]")
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SamplesFrame):
            return NotImplemented
        return (self.first_sample_index == other.first_sample_index
                and self.samples.shape == other.samples.shape
                and np.array_equal(self.samples, other.samples, equal_nan=True))


@dataclass(frozen=True)
class MarkerFrame:
    sample_index: int
    image_id: int
    run: int
    session: int
    is_target: bool | None


@dataclass(frozen=True)
class EndFrame:
    pass


WireFrame = HeaderFrame | SamplesFrame | MarkerFrame | EndFrame


def encode_frame(frame: WireFrame) -> bytes:
    """Serialize one frame to its exact byte layout."""
    if isinstance(frame, HeaderFrame):
        payload = struct.pack("<BBHd", frame.version[0], frame.version[1],
                              frame.channel_count, frame.rate)
        if len(frame.labels) != frame.channel_count:
            raise ValueError("one label per channel required")
        for label in frame.labels:
            raw = label.encode("utf-8")
            if len(raw) > 255:
                raise ValueError("channel label too long")
            payload += struct.pack("<B", len(raw)) + raw
        kind = KIND_HEADER
    elif isinstance(frame, SamplesFrame):
        block = frame.samples
        payload = struct.pack("<QI", frame.first_sample_index, block.shape[0])
        payload += block.astype("<f4", copy=False).tobytes(order="C")
        kind = KIND_SAMPLES
    elif isinstance(frame, MarkerFrame):
        target_byte = (_TARGET_UNKNOWN if frame.is_target is None
                       else int(bool(frame.is_target)))
        payload = _MARKER.pack(frame.sample_index, frame.image_id,
                               frame.run, frame.session, target_byte)
        kind = KIND_MARKER
    elif isinstance(frame, EndFrame):
        payload = b""
        kind = KIND_END
    else:
        raise TypeError(f"not a wire frame: {type(frame).__name__}")
    return _PREFIX.pack(MAGIC, kind, len(payload)) + payload


def decode_frame(buffer) -> tuple[WireFrame, int]:
    """Decode one frame from the start of buffer; returns (frame, bytes used).

    Raises IncompleteFrame when the buffer holds only part of a frame (nothing
    is consumed); raises ProtocolError on bad magic, unknown kind, or a
    malformed payload.
    """
    buffer = bytes(buffer)
    if len(buffer) < _PREFIX.size:
        raise IncompleteFrame("frame prefix incomplete")
    magic, kind, length = _PREFIX.unpack_from(buffer)
    if magic != MAGIC:
        raise ProtocolError(f"bad magic {magic!r}")
    total = _PREFIX.size + length
    if len(buffer) < total:
        raise IncompleteFrame("payload incomplete")
    payload = buffer[_PREFIX.size:total]

    if kind == KIND_HEADER:
        if len(payload) < 12:
            raise ProtocolError("header payload too short")
        major, minor, channel_count, rate = struct.unpack_from("<BBHd", payload)
        if major > VERSION[0]:
            raise VersionError(f"stream version {major}.{minor} is newer than "
                               f"{VERSION[0]}.{VERSION[1]}")
        labels = []
        pos = 12
        for _ in range(channel_count):
            if pos >= len(payload):
                raise ProtocolError("header label table truncated")
            n = payload[pos]
            pos += 1
            if pos + n > len(payload):
                raise ProtocolError("header label table truncated")
            labels.append(payload[pos:pos + n].decode("utf-8"))
            pos += n
        if pos != len(payload):
            raise ProtocolError("trailing bytes in header payload")
        frame = HeaderFrame(channel_count=channel_count, rate=rate,
                            labels=tuple(labels), version=(major, minor))
    elif kind == KIND_SAMPLES:
        if len(payload) < 12:
            raise ProtocolError("samples payload too short")
        first_index, k = struct.unpack_from("<QI", payload)
        body = payload[12:]
        if k == 0 or len(body) % 4 or (len(body) // 4) % k:
            raise ProtocolError("samples payload has inconsistent size")
        values = np.frombuffer(body, dtype="<f4").reshape(k, -1)
        frame = SamplesFrame(first_sample_index=first_index, samples=values)
    elif kind == KIND_MARKER:
        if len(payload) != _MARKER.size:
            raise ProtocolError("marker payload has wrong size")
        sample_index, image_id, run, session, target_byte = _MARKER.unpack(payload)
        if target_byte not in (0, 1, _TARGET_UNKNOWN):
            raise ProtocolError(f"bad target byte {target_byte}")
        is_target = None if target_byte == _TARGET_UNKNOWN else bool(target_byte)
        frame = MarkerFrame(sample_index=sample_index, image_id=image_id,
                            run=run, session=session, is_target=is_target)
    elif kind == KIND_END:
        if payload:
            raise ProtocolError("end frame carries no payload")
        frame = EndFrame()
    else:
        raise ProtocolError(f"unknown frame kind {kind}")
    return frame, total


class FrameReader:
    """Incremental decoder tolerant of arbitrary chunk boundaries."""

    def __init__(self) -> None:
        self._buffer = bytearray()

    def feed(self, data: bytes) -> list[WireFrame]:
        """Absorb bytes, return every frame completed by them."""
        self._buffer.extend(data)
        frames = []
        while True:
            try:
                frame, used = decode_frame(self._buffer)
            except IncompleteFrame:
                break
            del self._buffer[:used]
            frames.append(frame)
        return frames

    @property
    def pending_bytes(self) -> int:
        return len(self._buffer)


def stream_record(record: EegRecord, chunk: int = DEFAULT_CHUNK) -> list[WireFrame]:
    """Header, then markers and sample blocks in order, then end.

    Each marker is emitted before the sample frame that contains its index.
    """
    if chunk < 1:
        raise ValueError("chunk must be at least 1")
    frames: list[WireFrame] = [HeaderFrame(
        channel_count=record.n_channels, rate=record.rate,
        labels=tuple(record.channels))]
    markers = iter(record.markers)
    pending = next(markers, None)
    for start in range(0, record.n_samples, chunk):
        stop = min(start + chunk, record.n_samples)
        while pending is not None and pending.onset_sample < stop:
            frames.append(MarkerFrame(
                sample_index=pending.onset_sample, image_id=pending.image_id,
                run=pending.run_index, session=pending.session_index,
                is_target=pending.is_target))
            pending = next(markers, None)
        frames.append(SamplesFrame(
            first_sample_index=start,
            samples=record.samples[:, start:stop].T))
    frames.append(EndFrame())
    return frames


def reassemble(frames) -> EegRecord:
    """Rebuild a record from a complete frame sequence, enforcing the grammar."""
    frames = list(frames)
    if not frames:
        raise ProtocolError("empty stream")
    header = frames[0]
    if not isinstance(header, HeaderFrame):
        raise ProtocolError("stream must start with a header frame")
    if not isinstance(frames[-1], EndFrame):
        raise ProtocolError("stream not terminated by an end frame")
    blocks = []
    events = []
    expected_index = 0
    for frame in frames[1:-1]:
        if isinstance(frame, HeaderFrame):
            raise ProtocolError("duplicate header frame")
        if isinstance(frame, EndFrame):
            raise ProtocolError("frames after end")
        if isinstance(frame, SamplesFrame):
            if frame.first_sample_index != expected_index:
                raise ProtocolError(
                    f"sample frame at index {frame.first_sample_index}, "
                    f"expected {expected_index}")
            if frame.samples.shape[1] != header.channel_count:
                raise ProtocolError("sample frame channel count mismatch")
            expected_index += frame.samples.shape[0]
            blocks.append(frame.samples)
        else:
            events.append(StimulusEvent(
                image_id=frame.image_id, onset_sample=frame.sample_index,
                run_index=frame.run, session_index=frame.session,
                is_target=frame.is_target))
    if not blocks:
        raise ProtocolError("stream carries no samples")
    samples = np.concatenate(blocks, axis=0).T.astype(np.float64)
    channels = ChannelSet(header.labels)
    return EegRecord(channels, header.rate, samples, tuple(events))


def save_record(record: EegRecord, path, chunk: int = DEFAULT_CHUNK) -> None:
    """Write the wire format to a file."""
    data = b"".join(encode_frame(f) for f in stream_record(record, chunk))
    Path(path).write_bytes(data)


def load_record(path) -> EegRecord:
    """Read a record file; raises ProtocolError on malformed content."""
    data = Path(path).read_bytes()
    if not data:
        raise ProtocolError(f"empty record file: {path}")
    reader = FrameReader()
    frames = reader.feed(data)
    if reader.pending_bytes:
        raise ProtocolError("trailing bytes after the last complete frame")
    return reassemble(frames)


@dataclass(frozen=True)
class IcaSection:
    """Serialized ICA model plus the artifact mask used for cleaning."""

    mean: np.ndarray
    whitening: np.ndarray
    unmixing: np.ndarray
    mask: np.ndarray


@dataclass(frozen=True)
class ModelFile:
    """Persistable trained model: weights, bias, scaling, and pipeline shape."""

    weights: np.ndarray
    bias: float
    mins: np.ndarray
    maxes: np.ndarray
    channels: tuple[str, ...]
    window: EpochWindow
    format_version: int = MODEL_FORMAT_VERSION
    ica: IcaSection | None = None

    def __post_init__(self) -> None:
        weights = np.array(self.weights, dtype=np.float64, copy=True)
        mins = np.array(self.mins, dtype=np.float64, copy=True)
        maxes = np.array(self.maxes, dtype=np.float64, copy=True)
        expected = len(self.channels) * self.window.length
        if weights.shape != (expected,):
            raise FormatError(
                f"weights length {weights.shape[0]} != "
                f"{len(self.channels)} channels x {self.window.length} samples")
        if mins.shape != weights.shape or maxes.shape != weights.shape:
            raise FormatError("scaling vectors must match the weight length")
        for arr in (weights, mins, maxes):
            arr.flags.writeable = False
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "mins", mins)
        object.__setattr__(self, "maxes", maxes)
        object.__setattr__(self, "channels", tuple(self.channels))

    def __eq__(self, other) -> bool:
        if not isinstance(other, ModelFile):
            return NotImplemented
        return (np.array_equal(self.weights, other.weights)
                and self.bias == other.bias
                and np.array_equal(self.mins, other.mins)
                and np.array_equal(self.maxes, other.maxes)
                and self.channels == other.channels
                and self.window == other.window
                and self.format_version == other.format_version
                and _ica_equal(self.ica, other.ica))


def _ica_equal(a: IcaSection | None, b: IcaSection | None) -> bool:
    if a is None or b is None:
        return a is b
    return (np.array_equal(a.mean, b.mean)
            and np.array_equal(a.whitening, b.whitening)
            and np.array_equal(a.unmixing, b.unmixing)
            and np.array_equal(a.mask, b.mask))


def _require(mapping: dict, key: str):
    if key not in mapping:
        raise FormatError(f"model file missing field {key!r}")
    return mapping[key]


def save_model(model: ModelFile, path) -> None:
    """Write the model as versioned JSON; floats round-trip exactly."""
    doc = {
        "format_version": model.format_version,
        "weights": [float(v) for v in model.weights],
        "bias": float(model.bias),
        "mins": [float(v) for v in model.mins],
        "maxes": [float(v) for v in model.maxes],
        "channels": list(model.channels),
        "epoch_window": {"start_offset": model.window.start_offset,
                         "length": model.window.length},
        "ica": None if model.ica is None else {
            "mean": [float(v) for v in model.ica.mean],
            "whitening": [[float(v) for v in row] for row in model.ica.whitening],
            "unmixing": [[float(v) for v in row] for row in model.ica.unmixing],
            "mask": [bool(v) for v in model.ica.mask],
        },
    }
    Path(path).write_text(json.dumps(doc, allow_nan=False, indent=1) + "\n",
                          encoding="utf-8")


def load_model(path) -> ModelFile:
    """Read a model file; raises FormatError when structurally invalid."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"model file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise FormatError("model file must hold a JSON object")
    version = _require(doc, "format_version")
    if not isinstance(version, int) or version > MODEL_FORMAT_VERSION:
        raise FormatError(f"unsupported model format version {version!r}")
    window_doc = _require(doc, "epoch_window")
    window = EpochWindow(start_offset=int(_require(window_doc, "start_offset")),
                         length=int(_require(window_doc, "length")))
    ica_doc = _require(doc, "ica")
    ica_section = None
    if ica_doc is not None:
        ica_section = IcaSection(
            mean=np.asarray(_require(ica_doc, "mean"), dtype=np.float64),
            whitening=np.asarray(_require(ica_doc, "whitening"), dtype=np.float64),
            unmixing=np.asarray(_require(ica_doc, "unmixing"), dtype=np.float64),
            mask=np.asarray(_require(ica_doc, "mask"), dtype=bool),
        )
    try:
        return ModelFile(
            weights=np.asarray(_require(doc, "weights"), dtype=np.float64),
            bias=float(_require(doc, "bias")),
            mins=np.asarray(_require(doc, "mins"), dtype=np.float64),
            maxes=np.asarray(_require(doc, "maxes"), dtype=np.float64),
            channels=tuple(_require(doc, "channels")),
            window=window,
            format_version=version,
            ica=ica_section,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"malformed model file: {exc}") from None
