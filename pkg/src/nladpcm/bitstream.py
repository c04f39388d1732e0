"""Self-describing bitstream container.

Layout (little-endian), normative for format version 1:

    magic "NLAD" | u16 version | u8 n_bits | u16 frame_len |
    u8 predictor kind | u32 config length + UTF-8 config text |
    u64 rng_seed | u64 sample count | u32 CRC32(header so far) |
    packed codes, MSB-first within each byte

The header alone suffices to decode: the config text carries every
constant of the codec (quantizer bounds, multiplier table version,
training regime), and the seed regenerates the network initializations.
"""

import hashlib
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import BitstreamError
from .quantizer import pack_codes, unpack_codes

MAGIC = b"NLAD"
FORMAT_VERSION = 1

PREDICTOR_KIND_CODES = {"lpc": 0, "mlp": 1}
PREDICTOR_KIND_NAMES = {v: k for k, v in PREDICTOR_KIND_CODES.items()}


def config_hash(config_text: str) -> str:
    """Short stable identifier of a canonical config block."""
    return hashlib.sha256(config_text.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class BitstreamHeader:
    n_bits: int
    frame_len: int
    predictor_kind: str
    config_text: str
    rng_seed: int
    n_samples: int
    version: int = FORMAT_VERSION


@dataclass(frozen=True)
class Bitstream:
    header: BitstreamHeader
    codes: np.ndarray

    def body_size(self) -> int:
        """Exact packed size: ceil(n_samples * n_bits / 8) bytes."""
        return (self.header.n_samples * self.header.n_bits + 7) // 8

    def to_bytes(self) -> bytes:
        h = self.header
        config_bytes = h.config_text.encode("utf-8")
        head = MAGIC
        head += struct.pack("<HBH", h.version, h.n_bits, h.frame_len)
        head += struct.pack("<B", PREDICTOR_KIND_CODES[h.predictor_kind])
        head += struct.pack("<I", len(config_bytes)) + config_bytes
        head += struct.pack("<QQ", h.rng_seed, h.n_samples)
        head += struct.pack("<I", zlib.crc32(head))
        body = pack_codes(self.codes, h.n_bits)
        if len(body) != self.body_size():
            raise BitstreamError(
                f"packed body is {len(body)} bytes, expected {self.body_size()}"
            )
        return head + body

    @classmethod
    def from_bytes(cls, data: bytes) -> "Bitstream":
        if len(data) < 4 or data[:4] != MAGIC:
            raise BitstreamError(f"bad magic {data[:4]!r}, expected {MAGIC!r}", byte_offset=0)
        off = 4
        try:
            version, n_bits, frame_len = struct.unpack_from("<HBH", data, off)
        except struct.error:
            raise BitstreamError("header truncated", byte_offset=off)
        if version != FORMAT_VERSION:
            raise BitstreamError(f"unsupported format version {version}", byte_offset=off)
        off += 5
        try:
            (kind_code,) = struct.unpack_from("<B", data, off)
            off += 1
            (config_len,) = struct.unpack_from("<I", data, off)
            off += 4
        except struct.error:
            raise BitstreamError("header truncated", byte_offset=off)
        if kind_code not in PREDICTOR_KIND_NAMES:
            raise BitstreamError(f"unknown predictor kind {kind_code}", byte_offset=off - 5)
        if off + config_len > len(data):
            raise BitstreamError("config block overruns stream", byte_offset=off - 4)
        config_text = data[off : off + config_len].decode("utf-8")
        off += config_len
        try:
            rng_seed, n_samples = struct.unpack_from("<QQ", data, off)
            off += 16
            (crc_stored,) = struct.unpack_from("<I", data, off)
        except struct.error:
            raise BitstreamError("header truncated", byte_offset=off)
        crc_actual = zlib.crc32(data[:off])
        if crc_stored != crc_actual:
            raise BitstreamError(
                f"header CRC mismatch: stored {crc_stored:#010x}, computed {crc_actual:#010x}",
                byte_offset=off,
            )
        off += 4

        expected_body = (n_samples * n_bits + 7) // 8
        body = data[off:]
        if len(body) < expected_body:
            have = len(body) * 8 // n_bits
            raise BitstreamError(
                f"body truncated: expected {n_samples} codes, stream holds {have}",
                byte_offset=off + len(body),
            )
        codes = unpack_codes(body[:expected_body], n_bits, n_samples)
        header = BitstreamHeader(
            n_bits=n_bits,
            frame_len=frame_len,
            predictor_kind=PREDICTOR_KIND_NAMES[kind_code],
            config_text=config_text,
            rng_seed=rng_seed,
            n_samples=n_samples,
            version=version,
        )
        return cls(header=header, codes=codes)
