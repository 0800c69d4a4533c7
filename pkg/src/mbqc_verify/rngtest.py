"""FIPS 140-2 statistical tests on 20,000-bit streams.

Bounds follow FIPS PUB 140-2 section 4.9.1 as amended by the change notice of
2002-12-03 (the values used by ``rngtest`` from rng-tools). The original,
pre-change-notice bounds are available as :data:`FIPS_140_2_ORIGINAL`.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

STREAM_LENGTH = 20_000


@dataclass(frozen=True)
class FipsThresholds:
    """Open intervals for monobit and poker, closed intervals for runs."""

    monobit: tuple[int, int] = (9725, 10275)
    poker: tuple[float, float] = (2.16, 46.17)
    runs: tuple[tuple[int, int], ...] = ((2315, 2685), (1114, 1386), (527, 723), (240, 384), (103, 209), (103, 209))
    long_run: int = 26

    @classmethod
    def from_dict(cls, d: dict) -> "FipsThresholds":
        return cls(
            monobit=tuple(d["monobit"]),
            poker=tuple(d["poker"]),
            runs=tuple(tuple(r) for r in d["runs"]),
            long_run=int(d["long_run"]),
        )


FIPS_140_2 = FipsThresholds()
FIPS_140_2_ORIGINAL = FipsThresholds(
    monobit=(9654, 10346),
    poker=(1.03, 57.4),
    runs=((2267, 2733), (1079, 1421), (502, 748), (223, 402), (90, 223), (90, 223)),
    long_run=34,
)
THRESHOLDS = {"fips140-2": FIPS_140_2, "fips140-2-original": FIPS_140_2_ORIGINAL}


class StreamLengthError(ValueError):
    pass


def as_bits(bits: Iterable[int]) -> np.ndarray:
    arr = np.asarray(list(bits) if not isinstance(bits, np.ndarray) else bits, dtype=np.int8)
    if arr.ndim != 1 or not np.isin(arr, (0, 1)).all():
        raise ValueError("bit stream must be a flat sequence of 0/1")
    if arr.size != STREAM_LENGTH:
        raise StreamLengthError(f"FIPS tests need exactly {STREAM_LENGTH} bits, got {arr.size}")
    return arr


@dataclass(frozen=True)
class TestResult:
    name: str
    passed: bool
    statistic: object
    detail: dict = field(default_factory=dict)


def monobit(bits, th: FipsThresholds = FIPS_140_2) -> TestResult:
    ones = int(as_bits(bits).sum())
    lo, hi = th.monobit
    return TestResult("monobit", lo < ones < hi, ones)


def poker(bits, th: FipsThresholds = FIPS_140_2) -> TestResult:
    b = as_bits(bits).reshape(-1, 4).astype(np.int64)
    nibbles = b[:, 0] * 8 + b[:, 1] * 4 + b[:, 2] * 2 + b[:, 3]
    f = np.bincount(nibbles, minlength=16)
    x = 16 / 5000 * float((f**2).sum()) - 5000
    lo, hi = th.poker
    return TestResult("poker", lo < x < hi, x, {"counts": f.tolist()})


def run_lengths(bits: np.ndarray) -> list[tuple[int, int]]:
    """``(symbol, length)`` for each maximal run, in stream order."""
    edges = np.flatnonzero(np.diff(bits)) + 1
    starts = np.concatenate(([0], edges))
    ends = np.concatenate((edges, [bits.size]))
    return [(int(bits[s]), int(e - s)) for s, e in zip(starts, ends)]


def runs(bits, th: FipsThresholds = FIPS_140_2) -> TestResult:
    arr = as_bits(bits)
    counts = {0: [0] * 6, 1: [0] * 6}
    for sym, n in run_lengths(arr):
        counts[sym][min(n, 6) - 1] += 1
    ok = all(lo <= counts[s][k] <= hi for s in (0, 1) for k, (lo, hi) in enumerate(th.runs))
    return TestResult("runs", ok, {"zeros": counts[0], "ones": counts[1]})


def long_run(bits, th: FipsThresholds = FIPS_140_2) -> TestResult:
    longest = max(n for _, n in run_lengths(as_bits(bits)))
    return TestResult("long_run", longest < th.long_run, longest)


@dataclass(frozen=True)
class FipsReport:
    tests: tuple[TestResult, ...]

    @property
    def passed(self) -> bool:
        return all(t.passed for t in self.tests)

    def pattern(self) -> dict[str, bool]:
        return {t.name: t.passed for t in self.tests}

    def to_dict(self) -> dict:
        return {"passed": self.passed, "tests": [asdict(t) for t in self.tests]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def fips_suite(bits, th: FipsThresholds = FIPS_140_2) -> FipsReport:
    arr = as_bits(bits)
    return FipsReport(tuple(t(arr, th) for t in (monobit, poker, runs, long_run)))


def read_bits(path, fmt: str = "auto", length: int | None = STREAM_LENGTH) -> np.ndarray:
    """Read an ASCII ``0``/``1`` file (whitespace ignored) or raw bytes (MSB first).

    ``fmt='auto'`` treats the file as ASCII if it contains only 0, 1 and
    whitespace. With ``length`` set, the leading ``length`` bits are returned
    and a shorter file raises :class:`StreamLengthError`.
    """
    data = Path(path).read_bytes()
    if fmt == "auto":
        fmt = "ascii" if set(data) <= set(b"01 \t\r\n") and data.strip() else "binary"
    if fmt == "ascii":
        bits = np.array([c - 48 for c in data if c in (48, 49)], dtype=np.int8)
    elif fmt == "binary":
        bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8)).astype(np.int8)
    else:
        raise ValueError(f"unknown bit file format {fmt!r}")
    if length is not None:
        if bits.size < length:
            raise StreamLengthError(f"need {length} bits, file has {bits.size}")
        bits = bits[:length]
    return bits


def write_ascii_bits(bits: Sequence[int], path) -> None:
    Path(path).write_text("".join(str(int(b)) for b in bits) + "\n")
