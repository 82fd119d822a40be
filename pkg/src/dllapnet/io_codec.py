"""Weight archives, mel files, WAV audio, config files and seeded initialisation.

DLAP archive layout, all little-endian::

    b"DLAP" | version u32 | record count u32
    per record: name length u16 | UTF-8 name | rank u8 | dims u32 * rank
                | float32 data, row-major
"""
from __future__ import annotations

import os
import struct
import wave
import zlib
from collections.abc import Iterator, Mapping
from dataclasses import fields

import numpy as np
import yaml

from .errors import FormatError, InvalidArgumentError, MissingTensorError, UnsupportedFormatError
from .model import ModelConfig, parameter_specs
from .spectral import MelSpectrogram, SpectralConfig

MAGIC = b"DLAP"
VERSION = 1
_HEADER = struct.Struct("<4sII")


class WeightArchive(Mapping):
    """Ordered, immutable mapping of tensor names to float32 arrays."""

    def __init__(self, tensors: Mapping[str, np.ndarray] | None = None):
        self._tensors: dict[str, np.ndarray] = {}
        for name, value in (tensors or {}).items():
            arr = np.array(value, dtype="<f4", order="C")
            arr.setflags(write=False)
            self._tensors[name] = arr

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self._tensors[name]
        except KeyError:
            raise MissingTensorError(
                f"weight archive has no tensor named {name!r} "
                f"({len(self._tensors)} tensors present)"
            ) from None

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def __eq__(self, other):
        if not isinstance(other, WeightArchive):
            return NotImplemented
        return list(self) == list(other) and all(
            self[k].shape == other[k].shape
            and self[k].tobytes() == other[k].tobytes()
            for k in self
        )

    def __repr__(self):
        return f"WeightArchive({len(self)} tensors)"

    def updated(self, tensors: Mapping[str, np.ndarray]) -> "WeightArchive":
        """Copy with some tensors replaced or appended."""
        return WeightArchive({**self._tensors, **tensors})

    def to_bytes(self) -> bytes:
        parts = [_HEADER.pack(MAGIC, VERSION, len(self))]
        for name, arr in self._tensors.items():
            raw = name.encode("utf-8")
            if len(raw) > 0xFFFF:
                raise InvalidArgumentError(f"tensor name too long: {name[:40]}...")
            if arr.ndim > 0xFF:
                raise InvalidArgumentError(f"tensor {name!r} has rank {arr.ndim} > 255")
            parts.append(struct.pack("<H", len(raw)) + raw)
            parts.append(struct.pack(f"<B{arr.ndim}I", arr.ndim, *arr.shape))
            parts.append(arr.tobytes())
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "WeightArchive":
        if len(data) < _HEADER.size:
            raise FormatError(f"truncated DLAP archive: {len(data)} bytes, header needs 12")
        magic, version, count = _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise FormatError(f"not a DLAP archive: magic {magic!r}, expected b'DLAP'")
        if version != VERSION:
            raise FormatError(f"unsupported DLAP version {version}, expected {VERSION}")
        pos = _HEADER.size
        tensors: dict[str, np.ndarray] = {}

        def need(n, what):
            if pos + n > len(data):
                raise FormatError(
                    f"truncated DLAP archive reading {what} at byte {pos}: "
                    f"need {n} bytes, {len(data) - pos} left"
                )

        for index in range(count):
            need(2, f"record {index} name length")
            (name_len,) = struct.unpack_from("<H", data, pos)
            pos += 2
            need(name_len + 1, f"record {index} name")
            try:
                name = data[pos : pos + name_len].decode("utf-8")
            except UnicodeDecodeError as exc:
                raise FormatError(f"record {index} name is not UTF-8") from exc
            pos += name_len
            rank = data[pos]
            pos += 1
            need(4 * rank, f"dims of {name!r}")
            shape = struct.unpack_from(f"<{rank}I", data, pos)
            pos += 4 * rank
            nbytes = 4 * int(np.prod(shape, dtype=np.int64))
            need(nbytes, f"data of {name!r}")
            if name in tensors:
                raise FormatError(f"duplicate tensor name {name!r} in DLAP archive")
            tensors[name] = np.frombuffer(data, dtype="<f4", count=nbytes // 4, offset=pos).reshape(shape)
            pos += nbytes
        if pos != len(data):
            raise FormatError(f"{len(data) - pos} trailing bytes after last DLAP record")
        return cls(tensors)


def save_archive(archive: WeightArchive, path) -> None:
    with open(path, "wb") as fh:
        fh.write(archive.to_bytes())


def load_archive(path) -> WeightArchive:
    with open(path, "rb") as fh:
        return WeightArchive.from_bytes(fh.read())


def save_mel(mel, path, n_mels: int = 80) -> None:
    values = np.asarray(getattr(mel, "values", mel))
    if values.ndim != 2 or values.shape[1] != n_mels:
        raise InvalidArgumentError(f"mel must be [T, {n_mels}], got shape {values.shape}")
    save_archive(WeightArchive({"mel": values}), path)


def load_mel(path, n_mels: int = 80) -> MelSpectrogram:
    archive = load_archive(path)
    if list(archive) != ["mel"]:
        raise FormatError(f"mel file must hold one record named 'mel', found {list(archive)}")
    values = archive["mel"]
    if values.ndim != 2 or values.shape[1] != n_mels:
        raise InvalidArgumentError(
            f"mel record has shape {values.shape}, expected [T, {n_mels}]"
        )
    return MelSpectrogram(values)


def save_wav(samples, path, sample_rate: int = 16000) -> None:
    """Write mono 16-bit PCM, rounding to nearest and clipping to full scale."""
    x = np.asarray(samples, dtype=np.float64)
    pcm = np.clip(np.rint(x * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(os.fspath(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(sample_rate)
        fh.writeframes(pcm.tobytes())


def load_wav(path, sample_rate: int = 16000) -> np.ndarray:
    """Read mono 16-bit PCM at ``sample_rate`` into floats in [-1, 1)."""
    try:
        fh = wave.open(os.fspath(path), "rb")
    except (wave.Error, EOFError) as exc:
        raise FormatError(f"{path}: not a readable PCM WAV file ({exc})") from exc
    with fh:
        found = (fh.getframerate(), fh.getnchannels(), 8 * fh.getsampwidth())
        if found != (sample_rate, 1, 16):
            raise UnsupportedFormatError(
                f"{path}: need {sample_rate} Hz mono 16-bit PCM, found "
                f"{found[0]} Hz, {found[1]} channel(s), {found[2]}-bit"
            )
        raw = fh.readframes(fh.getnframes())
    return np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0


_SPECTRAL_KEYS = {f.name for f in fields(SpectralConfig)}
_MODEL_KEYS = {f.name for f in fields(ModelConfig)} - {"spectral"}


def config_from_dict(values: Mapping) -> ModelConfig:
    unknown = set(values) - _SPECTRAL_KEYS - _MODEL_KEYS
    if unknown:
        raise InvalidArgumentError(f"unknown config keys: {', '.join(sorted(unknown))}")
    spectral = SpectralConfig(**{k: v for k, v in values.items() if k in _SPECTRAL_KEYS})
    return ModelConfig(spectral, **{k: v for k, v in values.items() if k in _MODEL_KEYS})


def config_to_dict(cfg: ModelConfig) -> dict:
    out = {f.name: getattr(cfg.spectral, f.name) for f in fields(SpectralConfig)}
    out.update({k: getattr(cfg, k) for k in sorted(_MODEL_KEYS)})
    return out


def load_config(path) -> ModelConfig:
    """Read ``key: value`` lines; absent keys keep their defaults.

    The path ``default`` (when no such file exists) yields the built-in config.
    """
    if os.fspath(path) == "default" and not os.path.exists(path):
        return ModelConfig()
    with open(path) as fh:
        try:
            values = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise FormatError(f"{path}: config is not valid key: value text ({exc})") from exc
    if values is None:
        values = {}
    if not isinstance(values, dict):
        raise FormatError(f"{path}: config must be a mapping of key: value pairs")
    return config_from_dict(values)


def save_config(cfg: ModelConfig, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(config_to_dict(cfg), fh, sort_keys=False)


def _uniform_stream(seed: int, name: str, n: int) -> np.ndarray:
    """``n`` doubles in [0, 1) from Philox4x64-10 keyed by (seed, crc32(name))."""
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, zlib.crc32(name.encode("utf-8"))], dtype=np.uint64)
    raw = np.random.Philox(key=key).random_raw(n)
    return (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53


def random_init(cfg: ModelConfig, seed: int) -> WeightArchive:
    """Seeded weights, each tensor uniform in ``±1/sqrt(fan_in)``.

    Each tensor draws from its own Philox counter stream keyed by the seed and
    the CRC-32 of its name, so values do not depend on platform or tensor order.
    """
    tensors = {}
    for name, (shape, fan_in) in parameter_specs(cfg).items():
        n = int(np.prod(shape))
        u = _uniform_stream(seed, name, n)
        bound = 1.0 / np.sqrt(fan_in)
        tensors[name] = ((2.0 * u - 1.0) * bound).reshape(shape)
    return WeightArchive(tensors)


def zero_weights(cfg: ModelConfig) -> WeightArchive:
    return WeightArchive(
        {name: np.zeros(shape) for name, (shape, _) in parameter_specs(cfg).items()}
    )


__all__ = [
    "WeightArchive",
    "save_archive",
    "load_archive",
    "save_mel",
    "load_mel",
    "save_wav",
    "load_wav",
    "load_config",
    "save_config",
    "config_from_dict",
    "config_to_dict",
    "random_init",
    "zero_weights",
]
