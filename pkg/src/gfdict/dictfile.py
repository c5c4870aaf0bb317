"""Saving and loading dictionaries and filters as single container files.

Sections:

* ``FLDS`` - k u16, reduction polynomial u128;
* ``MODE`` - ascii mode name (dense, sparse, pure, tiered);
* ``CORE`` or ``TIER`` - the structure itself;
* ``MEMB`` - fingerprint hash descriptor, only for membership filters;
* ``META`` - the build report as canonical JSON.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

from .core_dict import MODES, CoreDict, RowRule
from .errors import CorruptFile, NotAMembershipFilter, UnsupportedFieldWidth
from .field import FieldSpec, default_spec
from .fileformat import Reader, pack_words, read_container, unpack_words, write_container
from .hashfam import PairwiseHash
from .member import MemberFilter
from .tiered_dict import TieredDict

_CORE_HEAD = "QIIQQB"
_NO_WINDOW = 0xFFFFFFFF


def field_section(spec: FieldSpec) -> bytes:
    return struct.pack("<H", spec.k) + spec.poly.to_bytes(16, "little")


def parse_field(buf: bytes) -> FieldSpec:
    r = Reader(buf, "FLDS")
    (k,) = r.unpack("H")
    poly = int.from_bytes(r.take(16), "little")
    try:
        spec = default_spec(k)
    except UnsupportedFieldWidth as exc:
        raise CorruptFile(str(exc)) from None
    if poly != spec.poly:
        # any irreducible polynomial would do, but we only ever write the canonical one
        raise CorruptFile(f"unexpected reduction polynomial {poly:#x} for k={k}")
    return spec


def core_section(d: CoreDict) -> bytes:
    rule = d.rule
    window = _NO_WINDOW if rule.window is None else rule.window
    head = struct.pack("<" + _CORE_HEAD, rule.m, rule.t, window, rule.seed, d.n,
                       MODES.index(rule.mode))
    return head + pack_words(d.b, d.spec.k)


def parse_core(spec: FieldSpec, buf: bytes) -> CoreDict:
    r = Reader(buf, "CORE")
    m, t, window, seed, n, mode_idx = r.unpack(_CORE_HEAD)
    if mode_idx >= len(MODES):
        raise CorruptFile(f"unknown mode index {mode_idx}")
    rule = RowRule(MODES[mode_idx], m, t, None if window == _NO_WINDOW else window, seed)
    if rule.mode != "dense" and m and (t < 1 or t > m):
        raise CorruptFile("row sparsity out of range")
    b = unpack_words(r.rest(), m, spec.k).tolist()
    return CoreDict(spec, rule, b, n)


@dataclass
class Loaded:
    """Everything read back from a file."""

    structure: CoreDict | TieredDict
    mode: str
    meta: dict
    member: MemberFilter | None = None

    @property
    def spec(self) -> FieldSpec:
        return self.structure.spec


def _mode_of(d: CoreDict | TieredDict) -> str:
    return "tiered" if isinstance(d, TieredDict) else d.mode


def dumps(d: CoreDict | TieredDict, meta: dict | None = None, g: PairwiseHash | None = None) -> bytes:
    mode = _mode_of(d)
    body = d.to_section() if isinstance(d, TieredDict) else core_section(d)
    sections = [(b"FLDS", field_section(d.spec)), (b"MODE", mode.encode()),
                (b"TIER" if mode == "tiered" else b"CORE", body)]
    if g is not None:
        sections.append((b"MEMB", g.to_bytes()))
    text = json.dumps(meta or {}, sort_keys=True, separators=(",", ":"))
    sections.append((b"META", text.encode()))
    return write_container(sections)


def dumps_member(f: MemberFilter, meta: dict | None = None) -> bytes:
    return dumps(f.dict, meta, f.g)


def loads(buf: bytes) -> Loaded:
    sections = read_container(buf)
    for tag in (b"FLDS", b"MODE"):
        if tag not in sections:
            raise CorruptFile(f"missing {tag.decode()} section")
    spec = parse_field(sections[b"FLDS"])
    mode = sections[b"MODE"].decode("ascii", "replace")
    if mode == "tiered":
        if b"TIER" not in sections:
            raise CorruptFile("missing TIER section")
        structure: CoreDict | TieredDict = TieredDict.from_section(spec, sections[b"TIER"])
    elif mode in MODES:
        if b"CORE" not in sections:
            raise CorruptFile("missing CORE section")
        structure = parse_core(spec, sections[b"CORE"])
        if structure.mode != mode:
            raise CorruptFile("MODE and CORE sections disagree")
    else:
        raise CorruptFile(f"unknown mode {mode!r}")
    try:
        meta = json.loads(sections.get(b"META", b"{}").decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptFile(f"unreadable META: {exc}") from None
    member = None
    if b"MEMB" in sections:
        raw = sections[b"MEMB"]
        if len(raw) != PairwiseHash.SIZE:
            raise CorruptFile("MEMB section has the wrong size")
        try:
            g = PairwiseHash.from_bytes(raw)
        except ValueError as exc:
            raise CorruptFile(f"bad fingerprint hash: {exc}") from None
        member = MemberFilter(structure, g)
    return Loaded(structure, mode, meta, member)


def loads_member(buf: bytes) -> MemberFilter:
    loaded = loads(buf)
    if loaded.member is None:
        raise NotAMembershipFilter("file has no MEMB section")
    return loaded.member


def save(path, d: CoreDict | TieredDict, meta: dict | None = None, g: PairwiseHash | None = None):
    with open(path, "wb") as fh:
        fh.write(dumps(d, meta, g))


def load(path) -> Loaded:
    with open(path, "rb") as fh:
        return loads(fh.read())


__all__ = ["Loaded", "dumps", "dumps_member", "loads", "loads_member", "save", "load",
           "field_section", "parse_field", "core_section", "parse_core"]
