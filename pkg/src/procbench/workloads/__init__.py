"""Desk-scale synthetic workloads.

Each module exposes ``invoke(argv, env, out, simulate)`` returning a
:class:`WorkloadResult`, and a console ``main()``. The simulated backend
calls ``invoke`` in-process with ``simulate=True``, which replaces real
sleeping/timing by a deterministic cost model.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence, TextIO


@dataclass(frozen=True)
class WorkloadResult:
    returncode: int
    seconds: float


# console script name -> module
PROGRAMS = {
    "procbench-amdahl": "procbench.workloads.amdahl",
    "procbench-triad": "procbench.workloads.triad",
    "procbench-bisection": "procbench.workloads.bisection",
}


def env_int(env: Mapping[str, str], name: str, default: int) -> int:
    value = env.get(name)
    return int(value) if value not in (None, "") else default


def run_main(invoke: Callable[..., WorkloadResult], argv: Optional[Sequence[str]] = None) -> int:
    result = invoke(list(sys.argv[1:] if argv is None else argv), dict(os.environ), sys.stdout,
                    simulate=os.environ.get("BENCH_SIMULATE") == "1")
    return result.returncode


def emit(out: TextIO, line: str) -> None:
    out.write(line + "\n")
    out.flush()
