import random

import pytest

from dualtable.errors import SchemaError, StorageError
from dualtable.schema import Column, ColumnType, RowCodec, Schema


def make_schema(*specs):
    return Schema([Column(name, ColumnType.parse(type_name))
                   for name, type_name in specs])


MIXED = make_schema(("a", "int64"), ("b", "float64"), ("c", "bool"),
                    ("d", "string"))
FIXED = make_schema(("x", "int64"), ("y", "float64"), ("z", "bool"))


def random_value(rng, ctype, null_rate=0.2):
    if rng.random() < null_rate:
        return None
    if ctype is ColumnType.INT64:
        return rng.randint(-(1 << 62), 1 << 62)
    if ctype is ColumnType.FLOAT64:
        return rng.uniform(-1e12, 1e12)
    if ctype is ColumnType.BOOL:
        return rng.random() < 0.5
    return "".join(rng.choice("abcdefgh é世") for _ in range(rng.randint(0, 30)))


def random_row(rng, schema, null_rate=0.2):
    return tuple(random_value(rng, col.type, null_rate) for col in schema.columns)


# -- schema basics ---------------------------------------------------------


def test_type_aliases_parse():
    assert ColumnType.parse("INT") is ColumnType.INT64
    assert ColumnType.parse("double") is ColumnType.FLOAT64
    assert ColumnType.parse("TEXT") is ColumnType.STRING
    assert ColumnType.parse("boolean") is ColumnType.BOOL
    with pytest.raises(SchemaError):
        ColumnType.parse("uuid")


def test_duplicate_and_bad_names_rejected():
    with pytest.raises(SchemaError):
        make_schema(("a", "int64"), ("a", "string"))
    with pytest.raises(SchemaError):
        make_schema(("9lives", "int64"))
    with pytest.raises(SchemaError):
        make_schema(("", "int64"))
    with pytest.raises(SchemaError):
        Schema([])


def test_index_lookup():
    assert MIXED.index("c") == 2
    assert MIXED.index_map() == {"a": 0, "b": 1, "c": 2, "d": 3}
    with pytest.raises(SchemaError):
        MIXED.index("nope")


def test_digest_is_stable_and_sensitive():
    assert MIXED.digest() == MIXED.digest()
    assert make_schema(("a", "int64")).digest() != make_schema(("b", "int64")).digest()
    assert make_schema(("a", "int64")).digest() != make_schema(("a", "string")).digest()
    assert 0 <= MIXED.digest() < (1 << 64)


def test_json_roundtrip():
    again = Schema.from_json(MIXED.to_json())
    assert again == MIXED
    assert again.digest() == MIXED.digest()


def test_check_value_rules():
    assert MIXED.check_value(0, None) is None
    assert MIXED.check_value(0, 7) == 7
    assert MIXED.check_value(1, 7) == 7.0
    assert isinstance(MIXED.check_value(1, 7), float)
    assert MIXED.check_value(2, True) is True
    assert MIXED.check_value(3, "hi") == "hi"
    with pytest.raises(SchemaError):
        MIXED.check_value(0, True)  # bool is not an int64
    with pytest.raises(SchemaError):
        MIXED.check_value(0, 1 << 63)
    with pytest.raises(SchemaError):
        MIXED.check_value(0, 1.5)
    with pytest.raises(SchemaError):
        MIXED.check_value(2, 1)
    with pytest.raises(SchemaError):
        MIXED.check_value(3, 5)


def test_check_row_arity():
    with pytest.raises(SchemaError):
        MIXED.check_row((1, 2.0, True))
    with pytest.raises(SchemaError):
        MIXED.check_row((1, 2.0, True, "x", "extra"))


def test_row_logical_bytes():
    # 8 + 8 + 1 + len(utf8)
    assert MIXED.row_logical_bytes((1, 2.0, True, "abc")) == 20
    assert MIXED.row_logical_bytes((None, None, None, None)) == 0
    assert MIXED.row_logical_bytes((1, None, None, "é")) == 10


# -- row codec -------------------------------------------------------------


def test_codec_roundtrip_mixed():
    rng = random.Random(21)
    codec = RowCodec(MIXED)
    for _ in range(500):
        row = MIXED.check_row(random_row(rng, MIXED))
        blob = codec.encode_row(row)
        back, used = codec.decode_row(blob, 0)
        assert back == row
        assert used == len(blob)
        assert codec.logical_bytes(row) == MIXED.row_logical_bytes(row)


def test_codec_roundtrip_fixed_width_fast_path():
    rng = random.Random(22)
    codec = RowCodec(FIXED)
    rows = [FIXED.check_row(random_row(rng, FIXED)) for _ in range(500)]
    blob = codec.encode_rows(rows)
    back, used = codec.decode_rows(blob, 0, len(rows))
    assert back == rows
    assert used == len(blob)


def test_fast_and_slow_paths_encode_identically():
    # same schema, rows without NULLs: the struct fast path and the general
    # path must produce byte-identical frames
    rng = random.Random(23)
    codec = RowCodec(FIXED)
    for _ in range(300):
        row = FIXED.check_row(random_row(rng, FIXED, null_rate=0.0))
        assert codec.encode_row(row) == codec._encode_slow(row)


def test_null_bitmap_positions():
    codec = RowCodec(FIXED)
    blob = codec.encode_row((None, 1.5, None))
    # bitmap byte first; bits 0 and 2 set
    assert blob[0] == 0b00000101
    back, _ = codec.decode_row(blob, 0)
    assert back == (None, 1.5, None)


def test_decode_rejects_truncation_and_garbage():
    codec = RowCodec(MIXED)
    blob = codec.encode_row((1, 2.0, False, "hello"))
    for cut in range(len(blob)):
        with pytest.raises(StorageError):
            codec.decode_row(blob[:cut], 0)
    with pytest.raises(StorageError):
        codec.decode_rows(blob, 0, 2)


def test_wide_schema_bitmap():
    specs = [(f"c{i}", "int64") for i in range(19)]
    wide = make_schema(*specs)
    codec = RowCodec(wide)
    row = tuple(None if i % 3 == 0 else i for i in range(19))
    row = wide.check_row(row)
    back, _ = codec.decode_row(codec.encode_row(row), 0)
    assert back == row
