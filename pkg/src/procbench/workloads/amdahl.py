"""Amdahl-model sleeper: reports t_s + t_p / N, optionally with seeded noise."""

from __future__ import annotations

import argparse
import random
import time
from dataclasses import dataclass
from typing import Mapping, Sequence, TextIO

from . import WorkloadResult, emit, env_int, run_main


@dataclass(frozen=True)
class AmdahlConfig:
    serial_seconds: float
    parallel_seconds: float
    noise_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.serial_seconds < 0 or self.parallel_seconds < 0:
            raise ValueError("serial and parallel seconds must be non-negative")
        if not 0 <= self.noise_fraction < 1:
            raise ValueError("noise_fraction must lie in [0, 1)")


def model_time(config: AmdahlConfig, nodes: int) -> float:
    """Noisy model runtime; the noise draw depends only on (seed, nodes)."""
    if nodes < 1:
        raise ValueError("nodes must be >= 1")
    base = config.serial_seconds + config.parallel_seconds / nodes
    if config.noise_fraction == 0:
        return base
    rng = random.Random(f"amdahl:{config.seed}:{nodes}")
    return base * (1.0 + rng.uniform(-config.noise_fraction, config.noise_fraction))


def run_amdahl(config: AmdahlConfig, nodes: int, out: TextIO, simulate: bool = True) -> float:
    """Print ``FOM: time=<seconds> s`` and return the reported time.

    Simulated runs report the model value exactly; real runs sleep for it
    and report the measured duration.
    """
    target = model_time(config, nodes)
    if simulate:
        elapsed = target
    else:
        start = time.perf_counter()
        time.sleep(target)
        elapsed = time.perf_counter() - start
    emit(out, f"FOM: time={elapsed!r} s")
    return elapsed


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="procbench-amdahl", description=__doc__)
    p.add_argument("--serial", type=float, required=True, help="serial seconds t_s")
    p.add_argument("--parallel", type=float, required=True, help="parallel seconds t_p")
    p.add_argument("--noise", type=float, default=0.0, help="uniform noise fraction in [0, 1)")
    p.add_argument("--seed", type=int, default=None, help="default: $BENCH_SEED or 0")
    p.add_argument("--nodes", type=int, default=None, help="default: $BENCH_NODES or 1")
    return p


def invoke(argv: Sequence[str], env: Mapping[str, str], out: TextIO, simulate: bool = False) -> WorkloadResult:
    args = _parser().parse_args(argv)
    seed = args.seed if args.seed is not None else env_int(env, "BENCH_SEED", 0)
    nodes = args.nodes if args.nodes is not None else env_int(env, "BENCH_NODES", 1)
    config = AmdahlConfig(args.serial, args.parallel, args.noise, seed)
    return WorkloadResult(0, run_amdahl(config, nodes, out, simulate))


def main(argv=None) -> int:
    return run_main(invoke, argv)


if __name__ == "__main__":
    raise SystemExit(main())
