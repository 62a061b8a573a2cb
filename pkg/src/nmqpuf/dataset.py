"""CRP dataset files: fixed-width binary and headered CSV.

Binary layout (all little-endian)::

    offset  size  field
         0     8  magic  b"NMQCRP\\0\\0"
         8     2  format version (uint16, currently 1)
        10     2  n, challenge width in bits (uint16, 1..64)
        12     1  architecture tag (uint8: 1 apuf, 2 nmq-ro, 3 xor-nmq-ro, 4 xor-apuf)
        13     1  k, composition size (uint8)
        14     2  reserved, zero
        16     4  g, trap counter final value (uint32, 0 for arbiter PUFs)
        20     4  reserved, zero
        24     8  seed digest (uint64, BLAKE2b-64 of the generating config)
        32     8  record count (uint64)
        40     8  enrollment temperature, degC (float64)
        48    16  reserved, zero
        64     -  records

Each record is 9 bytes: the challenge as uint64 with stage ``i`` in bit
``i``, followed by the response byte (0 or 1).  Record ``j`` therefore
starts at ``64 + 9 * j``.

The CSV form carries the same header as ``# key=value`` comment lines, then
``challenge,response,temperature,draw`` rows with the challenge in hex; the
last two columns may be empty.
"""

from __future__ import annotations

import csv
import hashlib
import io
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Protocol

import numpy as np

from .entropy import ENROLLMENT, EnvironmentCondition, InstanceConfig, format_config, pack_challenges, unpack_challenges
from .models import APUF, NMQ_RO, XOR_APUF, XOR_NMQ_RO, make_puf

MAGIC = b"NMQCRP\x00\x00"
VERSION = 1
HEADER = struct.Struct("<8sHHBBHIIQQd16x")
HEADER_LEN = HEADER.size
RECORD = np.dtype([("challenge", "<u8"), ("response", "u1")])
RECORD_LEN = RECORD.itemsize

ARCH_TAGS = {APUF: 1, NMQ_RO: 2, XOR_NMQ_RO: 3, XOR_APUF: 4}
TAG_ARCHS = {v: k for k, v in ARCH_TAGS.items()}


class DatasetError(ValueError):
    pass


class BadMagicError(DatasetError):
    pass


class UnsupportedVersionError(DatasetError):
    pass


class TruncatedDatasetError(DatasetError):
    pass


class RecordCountError(DatasetError):
    pass


class UnknownArchitectureError(DatasetError):
    pass


@dataclass(frozen=True)
class DatasetHeader:
    n: int
    architecture: str
    g: int = 0
    k: int = 1
    seed_digest: int = 0
    record_count: int = 0
    enrollment_temperature: float = 20.0
    version: int = VERSION

    def __post_init__(self):
        if self.architecture not in ARCH_TAGS:
            raise UnknownArchitectureError(f"unknown architecture {self.architecture!r}")
        if not 1 <= self.n <= 64:
            raise DatasetError(f"n must be in [1, 64], got {self.n}")

    def describe(self) -> str:
        return f"{self.architecture} n={self.n} g={self.g} k={self.k} digest={self.seed_digest:016x}"


class CrpRecord(NamedTuple):
    challenge: int
    response: int
    temperature: float | None = None
    draw: int | None = None


@dataclass
class CrpDataset:
    header: DatasetHeader
    challenges: np.ndarray
    responses: np.ndarray
    temperatures: np.ndarray | None = field(default=None, repr=False)
    draws: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.challenges = np.asarray(self.challenges, dtype=np.uint8).reshape(-1, self.header.n)
        self.responses = np.asarray(self.responses, dtype=np.uint8).ravel()
        if len(self.challenges) != len(self.responses):
            raise DatasetError("one response per challenge required")
        if np.any(self.responses > 1):
            raise DatasetError("responses must be 0 or 1")
        if self.header.record_count != len(self.responses):
            self.header = _replace(self.header, record_count=len(self.responses))

    def __len__(self):
        return len(self.responses)

    @property
    def packed(self) -> np.ndarray:
        return pack_challenges(self.challenges) if len(self) else np.zeros(0, np.uint64)

    def records(self):
        temps = self.temperatures if self.temperatures is not None else [None] * len(self)
        draws = self.draws if self.draws is not None else [None] * len(self)
        for c, r, t, d in zip(self.packed, self.responses, temps, draws):
            yield CrpRecord(int(c), int(r), None if t is None else float(t), None if d is None else int(d))

    def subset(self, index) -> "CrpDataset":
        sub = lambda a: None if a is None else a[index]
        return CrpDataset(self.header, self.challenges[index], self.responses[index],
                          sub(self.temperatures), sub(self.draws))

    def split(self, n_test: int | float, seed: int = 0):
        """Random train/test split on distinct challenges; repeated evaluations stay together."""
        keys = self.packed
        uniq, inverse = np.unique(keys, return_inverse=True)
        if isinstance(n_test, float):
            n_test = int(round(n_test * len(uniq)))
        if not 0 < n_test < len(uniq):
            raise DatasetError(f"cannot hold out {n_test} of {len(uniq)} distinct challenges")
        rng = np.random.default_rng(seed)
        is_test = np.zeros(len(uniq), dtype=bool)
        is_test[rng.choice(len(uniq), n_test, replace=False)] = True
        mask = is_test[inverse]
        return self.subset(~mask), self.subset(mask)


def _replace(header, **kw):
    from dataclasses import replace
    return replace(header, **kw)


def config_digest(*parts) -> int:
    text = "\n".join(format_config(p) if isinstance(p, InstanceConfig) else str(p) for p in parts)
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "little")


# -- binary ---------------------------------------------------------------


def encode_binary(ds: CrpDataset) -> bytes:
    h = ds.header
    head = HEADER.pack(MAGIC, h.version, h.n, ARCH_TAGS[h.architecture], h.k, 0, h.g, 0,
                       h.seed_digest, len(ds), h.enrollment_temperature)
    body = np.empty(len(ds), dtype=RECORD)
    body["challenge"] = ds.packed
    body["response"] = ds.responses
    return head + body.tobytes()


def decode_binary(data: bytes) -> CrpDataset:
    if len(data) < HEADER_LEN:
        if data[:len(MAGIC)] != MAGIC[:len(data)]:
            raise BadMagicError("not a CRP dataset")
        raise TruncatedDatasetError(f"header needs {HEADER_LEN} bytes, file has {len(data)}")
    magic, version, n, tag, k, _, g, _, digest, count, temp = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersionError(f"format version {version} not supported")
    if tag not in TAG_ARCHS:
        raise UnknownArchitectureError(f"unknown architecture tag {tag}")
    header = DatasetHeader(n, TAG_ARCHS[tag], g, k, digest, count, temp, version)
    body = len(data) - HEADER_LEN
    if body < count * RECORD_LEN:
        raise TruncatedDatasetError(f"header announces {count} records, body holds {body / RECORD_LEN:g}")
    if body > count * RECORD_LEN:
        raise RecordCountError(f"header announces {count} records, body holds {body / RECORD_LEN:g}")
    records = np.frombuffer(data, dtype=RECORD, offset=HEADER_LEN, count=count)
    if count and np.any(records["challenge"] >> np.uint64(n) if n < 64 else False):
        raise DatasetError(f"challenge wider than n={n} bits")
    return CrpDataset(header, unpack_challenges(records["challenge"], n), records["response"].copy())


# -- CSV --------------------------------------------------------------------

_CSV_COLUMNS = ["challenge", "response", "temperature", "draw"]


def encode_csv(ds: CrpDataset) -> str:
    h = ds.header
    out = io.StringIO()
    out.write(f"# nmqpuf-crp version={h.version}\n")
    for key in ("n", "architecture", "g", "k"):
        out.write(f"# {key}={getattr(h, key)}\n")
    out.write(f"# seed_digest={h.seed_digest:#018x}\n")
    out.write(f"# record_count={len(ds)}\n")
    out.write(f"# enrollment_temperature={h.enrollment_temperature!r}\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(_CSV_COLUMNS)
    width = (h.n + 3) // 4
    for rec in ds.records():
        w.writerow([f"{rec.challenge:0{width}x}", rec.response,
                    "" if rec.temperature is None else repr(rec.temperature),
                    "" if rec.draw is None else rec.draw])
    return out.getvalue()


def decode_csv(text: str) -> CrpDataset:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# nmqpuf-crp"):
        raise BadMagicError("not a CRP dataset CSV")
    version = int(lines[0].split("version=", 1)[1])
    if version != VERSION:
        raise UnsupportedVersionError(f"format version {version} not supported")
    meta = {}
    i = 1
    while i < len(lines) and lines[i].startswith("#"):
        key, _, value = lines[i][1:].strip().partition("=")
        meta[key] = value
        i += 1
    try:
        header = DatasetHeader(int(meta["n"]), meta["architecture"], int(meta["g"]), int(meta["k"]),
                               int(meta["seed_digest"], 16), int(meta["record_count"]),
                               float(meta["enrollment_temperature"]), version)
    except KeyError as e:
        raise TruncatedDatasetError(f"missing header field {e}") from None
    rows = list(csv.reader(lines[i:]))
    if not rows or rows[0] != _CSV_COLUMNS:
        raise TruncatedDatasetError("missing column header row")
    rows = rows[1:]
    if len(rows) < header.record_count:
        raise TruncatedDatasetError(f"header announces {header.record_count} records, found {len(rows)}")
    if len(rows) > header.record_count:
        raise RecordCountError(f"header announces {header.record_count} records, found {len(rows)}")
    packed = np.array([int(r[0], 16) for r in rows], dtype=np.uint64)
    responses = np.array([int(r[1]) for r in rows], dtype=np.uint8)
    temps = [r[2] for r in rows]
    draws = [r[3] for r in rows]
    temps = None if not any(temps) else np.array([float(t) if t else np.nan for t in temps])
    draws = None if not any(draws) else np.array([int(d) if d else -1 for d in draws])
    return CrpDataset(header, unpack_challenges(packed, header.n), responses, temps, draws)


# -- files ------------------------------------------------------------------


def _is_csv(path, fmt):
    return (fmt or Path(path).suffix.lstrip(".").lower()) == "csv"


def write_dataset(path, ds: CrpDataset, fmt: str | None = None) -> None:
    """Write ``ds``; ``fmt`` is ``"csv"`` or ``"bin"`` (default: by file suffix)."""
    if _is_csv(path, fmt):
        Path(path).write_text(encode_csv(ds))
    else:
        Path(path).write_bytes(encode_binary(ds))


def read_dataset(path, fmt: str | None = None) -> CrpDataset:
    if _is_csv(path, fmt):
        return decode_csv(Path(path).read_text())
    return decode_binary(Path(path).read_bytes())


class DatasetAdapter(Protocol):
    """Converter from a third-party CRP dump into a :class:`CrpDataset`.

    No concrete adapter ships; register one with :func:`register_adapter`.
    """

    def read(self, path) -> CrpDataset: ...


ADAPTERS: dict[str, DatasetAdapter] = {}


def register_adapter(name: str, adapter: DatasetAdapter) -> None:
    ADAPTERS[name] = adapter


def import_dataset(path, adapter: str) -> CrpDataset:
    try:
        return ADAPTERS[adapter].read(path)
    except KeyError:
        raise DatasetError(f"no dataset adapter registered under {adapter!r}") from None


# -- generation -------------------------------------------------------------


def unique_challenges(m: int, n: int, seed: int) -> np.ndarray:
    """``m`` distinct uniformly drawn challenges, in draw order, as a bit matrix."""
    if m > 2**n:
        raise ValueError(f"cannot draw {m} distinct challenges from a space of 2^{n}")
    rng = np.random.default_rng(seed)
    if 2**n <= 4 * m:
        return unpack_challenges(rng.choice(2**n, size=m, replace=False).astype(np.uint64), n)
    mask = np.uint64(2**n - 1) if n < 64 else np.uint64(0xFFFFFFFFFFFFFFFF)
    seen: set[int] = set()
    out = []
    while len(out) < m:
        for v in (rng.integers(0, 2**64, size=m - len(out), dtype=np.uint64) & mask).tolist():
            if v not in seen:
                seen.add(v)
                out.append(v)
    return unpack_challenges(np.array(out, dtype=np.uint64), n)


def generate_dataset(config: InstanceConfig, architecture: str = NMQ_RO, g: int = 200, k: int = 1,
                     n_crps: int = 10_000, seed: int = 0, env: EnvironmentCondition = ENROLLMENT,
                     evals: int = 1, noisy: bool = True) -> CrpDataset:
    """Sample an instance from ``config`` and record its responses.

    With ``evals > 1`` each challenge is evaluated that many times and the
    records of one challenge are stored consecutively with draw indices
    ``0 .. evals-1``.
    """
    puf = make_puf(config, architecture, g, k)
    noise = config.noise() if noisy else config.noise().__class__(0.0, config.seed)
    challenges = unique_challenges(n_crps, config.n, seed)
    if evals > 1:
        challenges = np.repeat(challenges, evals, axis=0)
        draws = np.tile(np.arange(evals), n_crps)
    else:
        draws = np.zeros(n_crps, dtype=np.int64)
    responses = puf.evaluate(challenges, env, noise, draws) if n_crps else np.zeros(0, np.uint8)
    header = DatasetHeader(config.n, architecture, g if architecture in (NMQ_RO, XOR_NMQ_RO) else 0,
                           getattr(puf, "k", 1), config_digest(config, architecture, g, k), len(responses),
                           env.enrollment_temperature)
    temps = np.full(len(responses), env.temperature)
    return CrpDataset(header, challenges, responses, temps, draws)
