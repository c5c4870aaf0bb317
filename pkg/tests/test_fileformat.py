from __future__ import annotations

import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gfdict import dictfile
from gfdict.core_dict import build_core
from gfdict.errors import CorruptFile, NotAMembershipFilter
from gfdict.fileformat import pack_words, read_container, unpack_words, write_container
from gfdict.member import member_build, probe_digests, query_values
from gfdict.tiered_dict import build_tiered


@given(st.integers(1, 64).flatmap(
    lambda k: st.tuples(st.just(k), st.lists(st.integers(0, (1 << k) - 1), max_size=50))))
def test_pack_round_trip(case):
    k, words = case
    buf = pack_words(words, k)
    assert len(buf) == (len(words) * k + 7) // 8
    assert unpack_words(buf, len(words), k).tolist() == words


def test_pack_bit_order():
    # word i occupies stream bits [i*k, (i+1)*k), little-endian within bytes
    assert pack_words([0b101, 0b011], 3) == bytes([0b011101])
    assert pack_words([1, 0, 0, 0, 0, 0, 0, 0, 1], 1) == b"\x01\x01"
    assert pack_words([0xABC, 0x123], 12) == bytes([0xBC, 0x3A, 0x12])


def test_container_round_trip_and_layout():
    blob = write_container([(b"AAAA", b"xy"), (b"BBBB", b"")])
    assert blob[:4] == b"GFD1"
    assert struct.unpack_from("<HH", blob, 4) == (1, 2)
    assert read_container(blob) == {b"AAAA": b"xy", b"BBBB": b""}


@pytest.mark.parametrize("mutate", [
    lambda b: b"XXXX" + b[4:],
    lambda b: b[:4] + struct.pack("<H", 9) + b[6:],
    lambda b: b[:10],
    lambda b: b[:-1],
])
def test_corrupt_containers(mutate):
    blob = write_container([(b"AAAA", b"hello"), (b"BBBB", b"world")])
    with pytest.raises(CorruptFile):
        read_container(mutate(blob))


def test_overlapping_sections_rejected():
    blob = bytearray(write_container([(b"AAAA", b"hello"), (b"BBBB", b"world")]))
    # point the second section at the first one's body
    first_off = struct.unpack_from("<Q", blob, 12)[0]
    struct.pack_into("<Q", blob, 8 + 20 + 4, first_off + 1)
    with pytest.raises(CorruptFile):
        read_container(bytes(blob))


ROUND_TRIP_CASES = [(m, k) for m in ("dense", "sparse", "pure", "tiered") for k in (1, 4, 8, 16)
                    if (m, k) != ("pure", 1)]  # see test_pure_mode_parity_obstruction


@pytest.mark.parametrize("mode,k", ROUND_TRIP_CASES)
def test_dictionary_round_trip(mode, k):
    pairs = [(f"f{i}", (i * 2654435761) % (1 << k)) for i in range(400)]
    if mode == "tiered":
        d, rep = build_tiered(pairs, k, seed=1)
    else:
        d, rep = build_core(pairs, k, mode=mode, slack=100 if mode == "sparse" else 8, seed=1)
    blob = dictfile.dumps(d, rep.as_dict())
    loaded = dictfile.loads(blob)
    assert loaded.mode == mode and loaded.meta == rep.as_dict()
    assert all(loaded.structure.query(key) == v for key, v in pairs)
    probes = probe_digests(0, 300)
    assert np.array_equal(query_values(loaded.structure, probes), query_values(d, probes))
    assert dictfile.dumps(loaded.structure, loaded.meta) == blob


def test_member_round_trip_and_missing_section():
    f, rep = member_build([f"q{i}" for i in range(100)], 8, seed=2)
    blob = dictfile.dumps_member(f, rep.as_dict())
    back = dictfile.loads_member(blob)
    assert back.g == f.g and all(f"q{i}" in back for i in range(100))
    d, _ = build_core([("a", 1)], 8)
    with pytest.raises(NotAMembershipFilter):
        dictfile.loads_member(dictfile.dumps(d))


def test_missing_or_bad_sections():
    d, _ = build_core([("a", 1)], 8)
    sections = read_container(dictfile.dumps(d))
    for drop in (b"FLDS", b"MODE", b"CORE"):
        with pytest.raises(CorruptFile):
            dictfile.loads(write_container([(t, b) for t, b in sections.items() if t != drop]))
    bad_poly = dict(sections)
    bad_poly[b"FLDS"] = struct.pack("<H", 8) + (0x11D).to_bytes(16, "little")
    with pytest.raises(CorruptFile):
        dictfile.loads(write_container(list(bad_poly.items())))
    bad_mode = dict(sections)
    bad_mode[b"MODE"] = b"weird"
    with pytest.raises(CorruptFile):
        dictfile.loads(write_container(list(bad_mode.items())))
    truncated = dict(sections)
    truncated[b"CORE"] = sections[b"CORE"][:5]
    with pytest.raises(CorruptFile):
        dictfile.loads(write_container(list(truncated.items())))
