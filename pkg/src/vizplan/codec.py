"""Binary encoding of relations and structure payloads.

All multi-byte values are little-endian. A structure payload is:

    32-byte fixed header | meta block (UTF-8 JSON) | numeric cell data

Header layout (32 bytes):
    magic      u32   0x565A504C ("VZPL")
    kind_tag   u8
    version    u8
    flags      u16   unused
    dim_count  u16
    array_cnt  u16
    meta_len   u32
    data_len   u64
    fingerprint u64  truncated SHA-256 of (input encoding + kind params)

Relation encodings are self-describing and used both for shipping-size
accounting and for output digests.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass

from .relation import Relation

MAGIC = 0x565A504C
HEADER = struct.Struct("<IBBHHHIQQ")
HEADER_BYTES = HEADER.size
assert HEADER_BYTES == 32

KIND_TAGS = {"base_scan": 1, "hash_index": 2, "sorted_range_index": 3,
             "prefix_sum_cube": 4}

_REL_MAGIC = b"VZRL"
_TYPE_TAGS = {"int64": 0, "float64": 1, "string": 2, "bool": 3}
_TAG_TYPES = {v: k for k, v in _TYPE_TAGS.items()}


def encode_relation(rel: Relation) -> bytes:
    """Deterministic byte encoding of a relation (schema + columns)."""
    parts: list[bytes] = [_REL_MAGIC, struct.pack("<IQ", len(rel.schema), rel.row_count)]
    for cname, ctype in rel.schema:
        nb = cname.encode("utf-8")
        parts.append(struct.pack("<HB", len(nb), _TYPE_TAGS[ctype]))
        parts.append(nb)
    n = rel.row_count
    for (cname, ctype), col in zip(rel.schema, rel.columns):
        bitmap = bytearray((n + 7) // 8)
        for i, v in enumerate(col):
            if v is not None:
                bitmap[i >> 3] |= 1 << (i & 7)
        parts.append(bytes(bitmap))
        if ctype == "int64":
            parts.append(struct.pack(f"<{n}q", *[0 if v is None else v for v in col]))
        elif ctype == "float64":
            parts.append(struct.pack(f"<{n}d", *[0.0 if v is None else v for v in col]))
        elif ctype == "bool":
            parts.append(bytes(1 if v else 0 for v in col))
        else:
            blobs = [b"" if v is None else v.encode("utf-8") for v in col]
            offsets = [0]
            for b in blobs:
                offsets.append(offsets[-1] + len(b))
            parts.append(struct.pack(f"<{n + 1}I", *offsets))
            parts.append(b"".join(blobs))
    return b"".join(parts)


def decode_relation(buf: bytes, name: str = "decoded") -> Relation:
    if buf[:4] != _REL_MAGIC:
        raise ValueError("not a relation encoding")
    pos = 4
    ncols, nrows = struct.unpack_from("<IQ", buf, pos)
    pos += 12
    schema: list[tuple[str, str]] = []
    for _ in range(ncols):
        nlen, tag = struct.unpack_from("<HB", buf, pos)
        pos += 3
        cname = buf[pos:pos + nlen].decode("utf-8")
        pos += nlen
        schema.append((cname, _TAG_TYPES[tag]))
    columns: list[list] = []
    for cname, ctype in schema:
        nb = (nrows + 7) // 8
        bitmap = buf[pos:pos + nb]
        pos += nb
        present = [(bitmap[i >> 3] >> (i & 7)) & 1 for i in range(nrows)]
        if ctype == "int64":
            vals = list(struct.unpack_from(f"<{nrows}q", buf, pos))
            pos += 8 * nrows
        elif ctype == "float64":
            vals = list(struct.unpack_from(f"<{nrows}d", buf, pos))
            pos += 8 * nrows
        elif ctype == "bool":
            vals = [bool(b) for b in buf[pos:pos + nrows]]
            pos += nrows
        else:
            offsets = struct.unpack_from(f"<{nrows + 1}I", buf, pos)
            pos += 4 * (nrows + 1)
            blob = buf[pos:pos + offsets[-1]]
            pos += offsets[-1]
            vals = [blob[offsets[i]:offsets[i + 1]].decode("utf-8")
                    for i in range(nrows)]
        columns.append([v if p else None for v, p in zip(vals, present)])
    return Relation(name, schema, columns)


def relation_digest(rel: Relation) -> str:
    return hashlib.sha256(encode_relation(rel)).hexdigest()


def fingerprint(*chunks: bytes) -> int:
    """Truncated SHA-256 of the given byte chunks, as a u64."""
    h = hashlib.sha256()
    for c in chunks:
        h.update(c)
    return int.from_bytes(h.digest()[:8], "little")


@dataclass(frozen=True)
class PayloadParts:
    kind_tag: int
    dim_count: int
    array_count: int
    meta: dict
    data: bytes
    fingerprint: int


def pack_payload(parts: PayloadParts) -> bytes:
    meta_bytes = json.dumps(parts.meta, sort_keys=True,
                            separators=(",", ":")).encode("utf-8")
    header = HEADER.pack(MAGIC, parts.kind_tag, 1, 0, parts.dim_count,
                         parts.array_count, len(meta_bytes), len(parts.data),
                         parts.fingerprint)
    return header + meta_bytes + parts.data


def unpack_payload(payload: bytes) -> PayloadParts:
    (magic, kind_tag, version, _flags, dim_count, array_count,
     meta_len, data_len, fp) = HEADER.unpack_from(payload, 0)
    if magic != MAGIC:
        raise ValueError("bad payload magic")
    if version != 1:
        raise ValueError(f"unsupported payload version {version}")
    meta = json.loads(payload[HEADER_BYTES:HEADER_BYTES + meta_len].decode("utf-8"))
    data = payload[HEADER_BYTES + meta_len:HEADER_BYTES + meta_len + data_len]
    if len(data) != data_len:
        raise ValueError("truncated payload")
    return PayloadParts(kind_tag, dim_count, array_count, meta, data, fp)
