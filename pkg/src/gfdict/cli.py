"""Command-line interface: ``gfdict build|query|check|bench|member-build|member-query``.

Exit codes: 0 ok, 2 bad input (including unreadable dictionary files),
3 build failure, 4 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import struct
import sys
from dataclasses import fields

import numpy as np

from . import dictfile
from .core_dict import MODES, build_from_digests, canonical_pairs, core_bits
from .errors import (
    BuildFailed, CorruptFile, DuplicateKey, GFDictError, NotAMembershipFilter, SystemTooLarge,
    UnsupportedFieldWidth, ValueOutOfRange,
)
from .field import default_spec
from .hashfam import key_digest
from .member import fpr_measure, member_build, probe_digests, query_values
from .tiered_dict import LayoutParams, TieredDict, build_tiered_from_digests, plan_layout, tiered_bits

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_BUILD = 3
EXIT_VERIFY = 4

_LAYOUT_FIELDS = {f.name for f in fields(LayoutParams)}


class InputError(Exception):
    pass


# --- input files -------------------------------------------------------------

def read_keys(path: str, fmt: str = "text") -> list[bytes]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if fmt == "text":
        if not raw:
            return []
        lines = raw.split(b"\n")
        if lines[-1] == b"":
            lines.pop()
        return [ln[:-1] if ln.endswith(b"\r") else ln for ln in lines]
    keys, pos = [], 0
    while pos < len(raw):
        if pos + 4 > len(raw):
            raise InputError(f"{path}: truncated record length at byte {pos}")
        (n,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        if pos + n > len(raw):
            raise InputError(f"{path}: record at byte {pos - 4} runs past the end of the file")
        keys.append(raw[pos:pos + n])
        pos += n
    return keys


def read_values(path: str, k: int, fmt: str = "text") -> list[int]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if fmt == "text":
        out = []
        for lineno, line in enumerate(raw.decode("ascii", "replace").splitlines(), 1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(int(line, 10))
            except ValueError:
                raise InputError(f"{path}:{lineno}: not an unsigned integer: {line!r}") from None
            if out[-1] < 0:
                raise InputError(f"{path}:{lineno}: negative value")
        return out
    width = (k + 7) // 8
    if len(raw) % width:
        raise InputError(f"{path}: size {len(raw)} is not a multiple of the {width}-byte record")
    return [int.from_bytes(raw[i:i + width], "little") for i in range(0, len(raw), width)]


def write_keys(path: str, keys, fmt: str = "text"):
    with open(path, "wb") as fh:
        for key in keys:
            key = key.encode() if isinstance(key, str) else key
            if fmt == "text":
                fh.write(key + b"\n")
            else:
                fh.write(struct.pack("<I", len(key)) + key)


def write_values(path: str, values, k: int, fmt: str = "text"):
    with open(path, "wb") as fh:
        if fmt == "text":
            fh.write("".join(f"{v}\n" for v in values).encode())
        else:
            width = (k + 7) // 8
            fh.write(b"".join(int(v).to_bytes(width, "little") for v in values))


def _paired(args) -> list[tuple[bytes, int]]:
    keys = read_keys(args.keys, args.key_format)
    values = read_values(args.values, args.k, args.value_format)
    if len(keys) != len(values):
        raise InputError(f"{len(keys)} keys but {len(values)} values")
    return list(zip(keys, values))


def parse_layout(items: list[str] | None) -> dict:
    out = {}
    for item in items or []:
        name, sep, value = item.partition("=")
        if not sep or name not in _LAYOUT_FIELDS:
            raise InputError(f"bad --layout entry {item!r}; fields are {sorted(_LAYOUT_FIELDS)}")
        try:
            out[name] = int(value)
        except ValueError:
            raise InputError(f"--layout {name} needs an integer") from None
    return out


def _layout(n: int, k: int, overrides: dict) -> LayoutParams:
    try:
        return plan_layout(n, k, **overrides)
    except (TypeError, ValueError) as exc:
        raise InputError(f"invalid layout: {exc}") from None


def _emit(obj: dict):
    print(json.dumps(obj, sort_keys=True))


# --- commands --------------------------------------------------------------

def _build_structure(items, args):
    spec = default_spec(args.k)
    if args.mode == "tiered":
        params = _layout(len(items), args.k, parse_layout(args.layout))
        return build_tiered_from_digests(items, spec, params, args.seed, args.max_attempts)
    slack = args.slack
    if slack is None:
        slack = math.ceil(0.25 * len(items)) if args.mode == "sparse" else 8
    return build_from_digests(items, spec, mode=args.mode, t=args.t, slack=slack, seed=args.seed,
                              max_attempts=args.max_attempts, window=args.window)


def cmd_build(args) -> int:
    try:
        default_spec(args.k)
    except UnsupportedFieldWidth as exc:
        raise InputError(str(exc)) from None
    items = canonical_pairs(_paired(args), args.k)
    d, report = _build_structure(items, args)
    meta = report.as_dict()
    dictfile.save(args.out, d, meta)
    _emit(dict(meta, out=args.out))
    return EXIT_OK


def _query_keys(args) -> list[bytes]:
    if args.key is not None:
        return [args.key.encode()]
    if args.keys is None:
        raise InputError("give --key or --keys")
    return read_keys(args.keys, args.key_format)


def _digest_array(keys) -> np.ndarray:
    if not keys:
        return np.zeros((0, 16), dtype=np.uint8)
    raw = b"".join(key_digest(k) for k in keys)
    return np.frombuffer(raw, dtype=np.uint8).reshape(-1, 16)


def cmd_query(args) -> int:
    loaded = dictfile.load(args.dict)
    keys = _query_keys(args)
    vals = query_values(loaded.structure, _digest_array(keys))
    # everything is computed before anything is printed
    sys.stdout.write("".join(f"{int(v)}\n" for v in vals))
    return EXIT_OK


def cmd_check(args) -> int:
    loaded = dictfile.load(args.dict)
    args.k = loaded.spec.k
    pairs = _paired(args)
    got = query_values(loaded.structure, _digest_array([k for k, _ in pairs]))
    want = np.array([v for _, v in pairs], dtype=np.uint64)
    mismatches = int(np.count_nonzero(got != want))
    _emit({"checked": len(pairs), "mismatches": mismatches})
    return EXIT_OK if mismatches == 0 else EXIT_VERIFY


def _probe_stats(d, digests: np.ndarray) -> np.ndarray:
    if isinstance(d, TieredDict):
        return d.query_many(digests, with_probes=True)[1]
    return np.array([d.words_touched(bytes(row)) for row in digests], dtype=np.int64)


def _space(d) -> tuple[int, int]:
    if isinstance(d, TieredDict):
        payload, overhead, _ = tiered_bits(d)
        return payload, overhead
    payload, total = core_bits(d)
    return payload, total - payload


def bench_report(loaded: dictfile.Loaded, negatives: int, seed: int, keys=None) -> dict:
    d = loaded.structure
    probe_sets = []
    if keys:
        probe_sets.append(_digest_array(keys))
    if negatives:
        probe_sets.append(probe_digests(seed, negatives))
    probes = np.concatenate([_probe_stats(d, p) for p in probe_sets]) if probe_sets else np.zeros(0)
    payload, overhead = _space(d)
    n = d.n
    report = {
        "mode": loaded.mode,
        "k": loaded.spec.k,
        "n": n,
        "negatives": negatives,
        "fpr": None,
        "fpr_ci95": None,
        "probes_max": int(probes.max()) if probes.size else 0,
        "probes_mean": float(probes.mean()) if probes.size else 0.0,
        "payload_bits": payload,
        "overhead_bits": overhead,
        "bits_per_key": (payload + overhead) / n if n else 0.0,
    }
    if isinstance(d, TieredDict):
        report["sub_bucket_capacity"] = d.params.sub_bucket_capacity
    if loaded.member is not None and negatives:
        res = fpr_measure(loaded.member, negatives, seed)
        report["fpr"] = res.rate
        report["fpr_ci95"] = list(res.ci95)
    return report


def cmd_bench(args) -> int:
    loaded = dictfile.load(args.dict)
    keys = read_keys(args.keys, args.key_format) if args.keys else None
    report = bench_report(loaded, args.negatives, args.seed, keys)
    if args.report == "json":
        _emit(report)
    else:
        buf = io.StringIO()
        row = {k: (json.dumps(v) if isinstance(v, list) else v) for k, v in report.items()}
        w = csv.DictWriter(buf, fieldnames=list(row), lineterminator="\n")
        w.writeheader()
        w.writerow(row)
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def cmd_member_build(args) -> int:
    try:
        default_spec(args.k)
    except UnsupportedFieldWidth as exc:
        raise InputError(str(exc)) from None
    keys = read_keys(args.keys, args.key_format)
    kwargs = {}
    backend = args.backend
    if backend is None:
        backend = "tiered" if len(set(keys)) >= 4096 else "core"
    if backend == "tiered":
        n = len({key_digest(k) for k in keys})
        kwargs["params"] = _layout(n, args.k, parse_layout(args.layout))
    elif args.slack is not None:
        kwargs["slack"] = args.slack
    else:
        kwargs["slack"] = 8
    f, report = member_build(keys, args.k, backend=backend, seed=args.seed, mode=args.mode,
                             max_attempts=args.max_attempts, **kwargs)
    meta = report.as_dict()
    with open(args.out, "wb") as fh:
        fh.write(dictfile.dumps_member(f, meta))
    _emit(dict(meta, out=args.out))
    return EXIT_OK


def cmd_member_query(args) -> int:
    with open(args.dict, "rb") as fh:
        f = dictfile.loads_member(fh.read())
    hits = f.contains_many(_digest_array(_query_keys(args)))
    sys.stdout.write("".join("1\n" if h else "0\n" for h in hits))
    return EXIT_OK


# --- parser ----------------------------------------------------------------

def _key_format(p):
    p.add_argument("--key-format", choices=("text", "bin"), default="text")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gfdict", description="Static dictionaries over GF(2^k).")
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="build a dictionary file from keys and values")
    b.add_argument("--keys", required=True)
    b.add_argument("--values", required=True)
    b.add_argument("--k", type=int, required=True)
    b.add_argument("--mode", choices=MODES + ("tiered",), default="tiered")
    b.add_argument("--t", type=int, default=3, help="row sparsity for sparse mode")
    b.add_argument("--slack", type=int, default=None,
                   help="extra variables (default: 8 dense, ceil(n/4) sparse)")
    b.add_argument("--window", type=int, default=None, help="locality window for sparse rows")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--max-attempts", type=int, default=16)
    b.add_argument("--layout", action="append", metavar="FIELD=INT",
                   help="override a tiered layout field (repeatable)")
    b.add_argument("--out", required=True)
    _key_format(b)
    b.add_argument("--value-format", choices=("text", "bin"), default="text")
    b.set_defaults(func=cmd_build)

    q = sub.add_parser("query", help="print the stored value of each key")
    q.add_argument("--dict", required=True)
    g = q.add_mutually_exclusive_group(required=True)
    g.add_argument("--key")
    g.add_argument("--keys")
    _key_format(q)
    q.set_defaults(func=cmd_query)

    c = sub.add_parser("check", help="verify a dictionary against its inputs")
    c.add_argument("--dict", required=True)
    c.add_argument("--keys", required=True)
    c.add_argument("--values", required=True)
    _key_format(c)
    c.add_argument("--value-format", choices=("text", "bin"), default="text")
    c.set_defaults(func=cmd_check)

    be = sub.add_parser("bench", help="false-positive, probe and space statistics")
    be.add_argument("--dict", required=True)
    be.add_argument("--negatives", type=int, default=100_000)
    be.add_argument("--seed", type=int, default=0)
    be.add_argument("--keys", default=None, help="also count probes for these (stored) keys")
    _key_format(be)
    be.add_argument("--report", choices=("json", "csv"), default="json")
    be.set_defaults(func=cmd_bench)

    mb = sub.add_parser("member-build", help="build a membership filter")
    mb.add_argument("--keys", required=True)
    mb.add_argument("--k", type=int, required=True)
    mb.add_argument("--backend", choices=("core", "tiered"), default=None)
    mb.add_argument("--mode", choices=MODES, default="dense", help="row mode for the core backend")
    mb.add_argument("--slack", type=int, default=None)
    mb.add_argument("--seed", type=int, default=0)
    mb.add_argument("--max-attempts", type=int, default=16)
    mb.add_argument("--layout", action="append", metavar="FIELD=INT")
    mb.add_argument("--out", required=True)
    _key_format(mb)
    mb.set_defaults(func=cmd_member_build)

    mq = sub.add_parser("member-query", help="print 1 for (probable) members, 0 otherwise")
    mq.add_argument("--dict", required=True)
    g = mq.add_mutually_exclusive_group(required=True)
    g.add_argument("--key")
    g.add_argument("--keys")
    _key_format(mq)
    mq.set_defaults(func=cmd_member_query)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (BuildFailed, SystemTooLarge) as exc:
        print(f"gfdict: build failed: {exc}", file=sys.stderr)
        return EXIT_BUILD
    except (InputError, DuplicateKey, ValueOutOfRange, CorruptFile, NotAMembershipFilter,
            OSError) as exc:
        print(f"gfdict: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except GFDictError as exc:
        print(f"gfdict: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
