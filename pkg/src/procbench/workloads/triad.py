"""Memory-bandwidth triad kernel ``a = b + s * c`` with analytic verification.

Arrays should be well beyond the last-level cache size for a meaningful
bandwidth figure; this is not enforced.
"""

from __future__ import annotations

import argparse
import time
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, TextIO

import numpy as np

from . import WorkloadResult, emit, run_main

ELEMENT_SIZE = np.dtype(np.float64).itemsize
DEFAULT_SIM_BANDWIDTH = 1.0e11


class TriadVerificationError(RuntimeError):
    pass


@dataclass(frozen=True)
class TriadConfig:
    array_length: int
    repetitions: int
    scalar: float = 3.0

    def __post_init__(self):
        if self.array_length < 1:
            raise ValueError("array_length must be positive")
        if self.repetitions < 1:
            raise ValueError("repetitions must be positive")

    @property
    def bytes_moved(self) -> int:
        return 3 * ELEMENT_SIZE * self.array_length * self.repetitions


@dataclass(frozen=True)
class TriadResult:
    bandwidth: float
    seconds: float
    a: np.ndarray


def triad_arrays(length: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Zeroed ``a``, ``b[i] = i`` and ``c[i] = 1``."""
    return np.zeros(length), np.arange(length, dtype=np.float64), np.ones(length)


def run_triad(config: TriadConfig, model_bandwidth: Optional[float] = None) -> TriadResult:
    """Run the kernel and verify ``a[i] == i + s``.

    With ``model_bandwidth`` the elapsed time is ``bytes / model_bandwidth``
    instead of a measurement, which makes the result reproducible.
    """
    a, b, c = triad_arrays(config.array_length)
    s = config.scalar
    start = time.perf_counter()
    for _ in range(config.repetitions):
        np.multiply(c, s, out=a)
        np.add(a, b, out=a)
    elapsed = time.perf_counter() - start
    expected = np.arange(config.array_length, dtype=np.float64) + s
    if not np.array_equal(a, expected):
        bad = int(np.flatnonzero(a != expected)[0])
        raise TriadVerificationError(f"a[{bad}] = {a[bad]!r}, expected {expected[bad]!r}")
    if model_bandwidth is not None:
        elapsed = config.bytes_moved / model_bandwidth
    else:
        elapsed = max(elapsed, time.get_clock_info("perf_counter").resolution)
    return TriadResult(config.bytes_moved / elapsed, elapsed, a)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="procbench-triad", description=__doc__)
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--repetitions", type=int, default=10)
    p.add_argument("--scalar", type=float, default=3.0)
    return p


def invoke(argv: Sequence[str], env: Mapping[str, str], out: TextIO, simulate: bool = False) -> WorkloadResult:
    args = _parser().parse_args(argv)
    try:
        config = TriadConfig(args.length, args.repetitions, args.scalar)
    except ValueError as exc:
        emit(out, f"error: {exc}")
        return WorkloadResult(2, 0.0)
    model = float(env.get("SIM_MEMORY_BANDWIDTH", DEFAULT_SIM_BANDWIDTH)) if simulate else None
    try:
        result = run_triad(config, model)
    except TriadVerificationError as exc:
        emit(out, f"Solution fails: {exc}")
        return WorkloadResult(1, 0.0)
    except MemoryError:
        emit(out, "error: cannot allocate triad arrays")
        return WorkloadResult(3, 0.0)
    emit(out, "Solution Validates")
    emit(out, f"Triad time: {result.seconds!r} s")
    emit(out, f"FOM: triad_bandwidth={result.bandwidth!r} B/s")
    return WorkloadResult(0, result.seconds)


def main(argv=None) -> int:
    return run_main(invoke, argv)


if __name__ == "__main__":
    raise SystemExit(main())
