"""Table schemas, cell typing rules, and the row wire codec.

A row is a plain tuple of Python values (``int``, ``float``, ``str``,
``bool`` or ``None``). On disk every row is a null bitmap followed by a
``u32`` length prefix and payload per non-null cell:

    [bitmap: ceil(ncols/8) bytes] ([u32 len][payload])*

Bit ``i`` of the bitmap (LSB-first within each byte) is set when column
``i`` is NULL; null cells contribute no length/payload pair. Payloads are
big-endian: int64 as ``>q``, float64 as ``>d``, bool as one byte, strings
as UTF-8. Logical cell sizes (the "D" every cost formula talks about) are
the payload sizes alone: 8, 8, 1, and the UTF-8 byte length.
"""

from __future__ import annotations

import enum
import hashlib
import struct
from dataclasses import dataclass

from .errors import SchemaError, StorageError

_U32 = struct.Struct(">I")
_I64 = struct.Struct(">q")
_F64 = struct.Struct(">d")

_INT64_MIN = -(1 << 63)
_INT64_MAX = (1 << 63) - 1


class ColumnType(enum.Enum):
    INT64 = "int64"
    FLOAT64 = "float64"
    STRING = "string"
    BOOL = "bool"

    @classmethod
    def parse(cls, name: str) -> "ColumnType":
        try:
            return _TYPE_ALIASES[name.strip().lower()]
        except KeyError:
            raise SchemaError(f"unknown column type {name!r}") from None


_TYPE_ALIASES = {
    "int64": ColumnType.INT64,
    "int": ColumnType.INT64,
    "float64": ColumnType.FLOAT64,
    "float": ColumnType.FLOAT64,
    "double": ColumnType.FLOAT64,
    "string": ColumnType.STRING,
    "str": ColumnType.STRING,
    "text": ColumnType.STRING,
    "bool": ColumnType.BOOL,
    "boolean": ColumnType.BOOL,
}

# Fixed payload widths; strings are variable and excluded from fast paths.
_FIXED_WIDTH = {ColumnType.INT64: 8, ColumnType.FLOAT64: 8, ColumnType.BOOL: 1}


@dataclass(frozen=True)
class Column:
    name: str
    type: ColumnType


class Schema:
    """Ordered, uniquely named columns plus the row codec built from them."""

    def __init__(self, columns: list[Column] | tuple[Column, ...]):
        if not columns:
            raise SchemaError("schema needs at least one column")
        seen: set[str] = set()
        for col in columns:
            if not col.name or not col.name.replace("_", "a").isalnum() or col.name[0].isdigit():
                raise SchemaError(f"bad column name {col.name!r}")
            if col.name in seen:
                raise SchemaError(f"duplicate column {col.name!r}")
            seen.add(col.name)
        self.columns: tuple[Column, ...] = tuple(columns)
        self._index = {c.name: i for i, c in enumerate(self.columns)}
        self.codec = RowCodec(self)

    def __len__(self) -> int:
        return len(self.columns)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Schema) and self.columns == other.columns

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise SchemaError(f"no column named {name!r}") from None

    def index_map(self) -> dict[str, int]:
        """Column name to ordinal; treat as read-only."""
        return self._index

    def digest(self) -> int:
        """Stable u64 fingerprint, embedded in segment headers."""
        text = ",".join(f"{c.name}:{c.type.value}" for c in self.columns)
        return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big")

    def to_json(self) -> list[dict[str, str]]:
        return [{"name": c.name, "type": c.type.value} for c in self.columns]

    @classmethod
    def from_json(cls, items: list[dict[str, str]]) -> "Schema":
        return cls([Column(it["name"], ColumnType.parse(it["type"])) for it in items])

    # -- value typing ------------------------------------------------------

    def check_value(self, col_index: int, value):
        """Validate/coerce one cell; returns the stored representation."""
        if value is None:
            return None
        ctype = self.columns[col_index].type
        if ctype is ColumnType.INT64:
            if isinstance(value, bool) or not isinstance(value, int):
                raise SchemaError(f"column {self.columns[col_index].name!r} wants int64, got {value!r}")
            if not _INT64_MIN <= value <= _INT64_MAX:
                raise SchemaError(f"int64 overflow in column {self.columns[col_index].name!r}: {value}")
            return value
        if ctype is ColumnType.FLOAT64:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise SchemaError(f"column {self.columns[col_index].name!r} wants float64, got {value!r}")
            return float(value)
        if ctype is ColumnType.STRING:
            if not isinstance(value, str):
                raise SchemaError(f"column {self.columns[col_index].name!r} wants string, got {value!r}")
            return value
        if not isinstance(value, bool):
            raise SchemaError(f"column {self.columns[col_index].name!r} wants bool, got {value!r}")
        return value

    def check_row(self, row) -> tuple:
        if len(row) != len(self.columns):
            raise SchemaError(f"row has {len(row)} cells, schema has {len(self.columns)}")
        return tuple(self.check_value(i, v) for i, v in enumerate(row))

    def cell_size(self, col_index: int, value) -> int:
        """Logical payload bytes of one cell (0 for NULL)."""
        if value is None:
            return 0
        ctype = self.columns[col_index].type
        if ctype is ColumnType.STRING:
            return len(value.encode("utf-8"))
        return _FIXED_WIDTH[ctype]

    def row_logical_bytes(self, row) -> int:
        return sum(self.cell_size(i, v) for i, v in enumerate(row))


def encode_cell(ctype: ColumnType, value) -> bytes:
    if ctype is ColumnType.INT64:
        return _I64.pack(value)
    if ctype is ColumnType.FLOAT64:
        return _F64.pack(value)
    if ctype is ColumnType.STRING:
        return value.encode("utf-8")
    return b"\x01" if value else b"\x00"


def decode_cell(ctype: ColumnType, payload: bytes):
    if ctype is ColumnType.INT64:
        return _I64.unpack(payload)[0]
    if ctype is ColumnType.FLOAT64:
        return _F64.unpack(payload)[0]
    if ctype is ColumnType.STRING:
        return payload.decode("utf-8")
    if len(payload) != 1 or payload[0] > 1:
        raise StorageError(f"bad bool payload {payload!r}")
    return payload[0] == 1


class RowCodec:
    """Row <-> bytes translator with a packed fast path.

    Schemas without string columns have a fixed row width when no cell is
    NULL, so a single precompiled ``struct`` round-trips the whole row.
    """

    def __init__(self, schema: Schema):
        self._schema = schema
        self._types = tuple(c.type for c in schema.columns)
        self.bitmap_len = (len(self._types) + 7) // 8
        self._all_fixed = all(t in _FIXED_WIDTH for t in self._types)
        self._fast: struct.Struct | None = None
        if self._all_fixed:
            cell_fmt = {ColumnType.INT64: "Iq", ColumnType.FLOAT64: "Id", ColumnType.BOOL: "IB"}
            fmt = f">{self.bitmap_len}s" + "".join(cell_fmt[t] for t in self._types)
            self._fast = struct.Struct(fmt)
            self._zero_bitmap = b"\x00" * self.bitmap_len
            self._fixed_lens = tuple(_FIXED_WIDTH[t] for t in self._types)
            self._bool_cols = tuple(i for i, t in enumerate(self._types) if t is ColumnType.BOOL)
            self._fixed_row_logical = sum(self._fixed_lens)

    def logical_bytes(self, row) -> int:
        """Payload bytes of one row, the unit table stats are kept in."""
        if self._fast is not None and None not in row:
            return self._fixed_row_logical
        return self._schema.row_logical_bytes(row)

    # -- encoding ----------------------------------------------------------

    def encode_row(self, row) -> bytes:
        fast = self._fast
        if fast is not None and None not in row:
            args = [self._zero_bitmap]
            for width, value in zip(self._fixed_lens, row):
                args.append(width)
                args.append(value)
            return fast.pack(*args)
        return self._encode_slow(row)

    def _encode_slow(self, row) -> bytes:
        bitmap = bytearray(self.bitmap_len)
        parts = [b""]
        for i, value in enumerate(row):
            if value is None:
                bitmap[i >> 3] |= 1 << (i & 7)
                continue
            payload = encode_cell(self._types[i], value)
            parts.append(_U32.pack(len(payload)))
            parts.append(payload)
        parts[0] = bytes(bitmap)
        return b"".join(parts)

    def encode_rows(self, rows) -> bytes:
        return b"".join(self.encode_row(r) for r in rows)

    # -- decoding ----------------------------------------------------------

    def decode_row(self, buf: bytes, offset: int) -> tuple[tuple, int]:
        fast = self._fast
        nb = self.bitmap_len
        if fast is not None and buf[offset:offset + nb] == self._zero_bitmap:
            end = offset + fast.size
            if end > len(buf):
                raise StorageError("row runs past end of segment payload")
            fields = fast.unpack_from(buf, offset)
            values = list(fields[2::2])
            for i in self._bool_cols:
                values[i] = values[i] == 1
            return tuple(values), end
        return self._decode_slow(buf, offset)

    def _decode_slow(self, buf: bytes, offset: int) -> tuple[tuple, int]:
        nb = self.bitmap_len
        if offset + nb > len(buf):
            raise StorageError("row bitmap runs past end of segment payload")
        bitmap = buf[offset:offset + nb]
        offset += nb
        values = []
        for i, ctype in enumerate(self._types):
            if bitmap[i >> 3] & (1 << (i & 7)):
                values.append(None)
                continue
            if offset + 4 > len(buf):
                raise StorageError("cell length runs past end of segment payload")
            (length,) = _U32.unpack_from(buf, offset)
            offset += 4
            if offset + length > len(buf):
                raise StorageError("cell payload runs past end of segment payload")
            try:
                values.append(decode_cell(ctype, buf[offset:offset + length]))
            except (struct.error, UnicodeDecodeError) as exc:
                raise StorageError(f"undecodable cell payload: {exc}") from exc
            offset += length
        return tuple(values), offset

    def decode_rows(self, buf: bytes, offset: int, count: int) -> tuple[list[tuple], int]:
        rows = []
        decode = self.decode_row
        for _ in range(count):
            row, offset = decode(buf, offset)
            rows.append(row)
        return rows, offset
