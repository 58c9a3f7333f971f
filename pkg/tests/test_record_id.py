import random

import pytest

from dualtable import record_id
from dualtable.errors import StorageError


def test_pack_unpack_roundtrip_random():
    rng = random.Random(11)
    for _ in range(2000):
        file_id = rng.randrange(0, 1 << 32)
        row = rng.randrange(0, 1 << 32)
        rid = record_id.make_record_id(file_id, row)
        assert record_id.file_id_of(rid) == file_id
        assert record_id.row_number_of(rid) == row
        assert record_id.split_record_id(rid) == (file_id, row)


def test_known_values():
    assert record_id.make_record_id(0, 0) == 0
    assert record_id.make_record_id(0, 1) == 1
    assert record_id.make_record_id(1, 0) == 1 << 32
    assert record_id.make_record_id(2, 7) == (2 << 32) | 7
    top = record_id.make_record_id(0xFFFFFFFF, 0xFFFFFFFF)
    assert top == (1 << 64) - 1


def test_ordering_is_file_major():
    # every id in file f sorts below every id in file f+1
    assert record_id.make_record_id(3, 0xFFFFFFFF) < record_id.make_record_id(4, 0)
    rng = random.Random(12)
    pairs = [(rng.randrange(1 << 32), rng.randrange(1 << 32)) for _ in range(500)]
    rids = [record_id.make_record_id(f, r) for f, r in pairs]
    assert sorted(rids) == [record_id.make_record_id(f, r)
                            for f, r in sorted(pairs)]


def test_component_range_checks():
    for bad in (-1, 1 << 32, 1 << 40):
        with pytest.raises(StorageError):
            record_id.make_record_id(bad, 0)
        with pytest.raises(StorageError):
            record_id.make_record_id(0, bad)


def test_wire_encoding_big_endian():
    rid = record_id.make_record_id(1, 2)
    blob = record_id.encode_record_id(rid)
    assert blob == b"\x00\x00\x00\x01\x00\x00\x00\x02"
    assert record_id.decode_record_id(blob) == rid


def test_segment_window_covers_exactly_one_file():
    lo, hi = record_id.segment_window(5)
    assert lo == record_id.make_record_id(5, 0)
    assert hi == record_id.make_record_id(6, 0)
    assert lo <= record_id.make_record_id(5, 123) < hi
    assert not (lo <= record_id.make_record_id(4, 0xFFFFFFFF) < hi)
    assert not (lo <= record_id.make_record_id(6, 0) < hi)
