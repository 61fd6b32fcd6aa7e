"""Bisection bandwidth over loopback TCP.

``P`` endpoints are split into two halves and endpoint ``i`` is paired with
``i + P/2``. All pairs exchange messages at the same time, one thread per
endpoint; the figure of merit is the minimum per-pair bandwidth.
"""

from __future__ import annotations

import argparse
import random
import socket
import threading
import time
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence, TextIO

from . import WorkloadResult, emit, run_main

MIB = 1 << 20
DEFAULT_MESSAGE_BYTES = 16 * MIB
DEFAULT_SIM_LINK_BANDWIDTH = 12.5e9
_CHUNK = 1 << 20


class BisectionError(RuntimeError):
    pass


@dataclass(frozen=True)
class BisectionConfig:
    process_count: int
    message_bytes: int = DEFAULT_MESSAGE_BYTES
    repetitions: int = 1
    bidirectional: bool = True

    def __post_init__(self):
        if self.process_count < 2 or self.process_count % 2:
            raise ValueError(f"process count must be an even number >= 2, got {self.process_count}")
        if self.message_bytes < 1 or self.repetitions < 1:
            raise ValueError("message_bytes and repetitions must be positive")

    @property
    def bytes_per_pair(self) -> int:
        return self.message_bytes * self.repetitions * (2 if self.bidirectional else 1)


@dataclass(frozen=True)
class PairResult:
    pair: tuple[int, int]
    bytes_moved: int
    seconds: float

    @property
    def bandwidth(self) -> float:
        return self.bytes_moved / self.seconds


@dataclass(frozen=True)
class BisectionResult:
    pairs: list[PairResult]
    minimum: float


def pair_bisection(process_count: int) -> list[tuple[int, int]]:
    if process_count < 2 or process_count % 2:
        raise ValueError(f"process count must be an even number >= 2, got {process_count}")
    half = process_count // 2
    return [(i, i + half) for i in range(half)]


def _recv_exact(sock: socket.socket, view: memoryview, nbytes: int) -> None:
    got = 0
    while got < nbytes:
        n = sock.recv_into(view[: min(len(view), nbytes - got)])
        if n == 0:
            raise BisectionError("peer closed the connection")
        got += n


def _send_all(sock: socket.socket, payload: memoryview, nbytes: int) -> None:
    sent = 0
    while sent < nbytes:
        chunk = payload[: min(len(payload), nbytes - sent)]
        sock.sendall(chunk)
        sent += len(chunk)


class _Pair:
    def __init__(self, pair: tuple[int, int], config: BisectionConfig, timeout: float):
        self.pair = pair
        self.config = config
        self.timeout = timeout
        self.listener = socket.create_server(("127.0.0.1", 0))
        self.listener.settimeout(timeout)
        self.sockets: dict[str, socket.socket] = {}
        self.done: dict[str, float] = {}

    def connect(self) -> None:
        port = self.listener.getsockname()[1]
        a = socket.create_connection(("127.0.0.1", port), timeout=self.timeout)
        b, _ = self.listener.accept()
        self.listener.close()
        for s in (a, b):
            s.settimeout(self.timeout)
            s.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self.sockets = {"a": a, "b": b}

    def close(self) -> None:
        for s in self.sockets.values():
            s.close()

    def endpoint(self, role: str, payload: memoryview, barrier: threading.Barrier) -> None:
        sock = self.sockets[role]
        cfg = self.config
        recv_buf = memoryview(bytearray(min(_CHUNK, cfg.message_bytes)))
        ack = memoryview(bytearray(1))
        barrier.wait()
        if cfg.bidirectional:
            errors: list[BaseException] = []

            def sender():
                try:
                    for _ in range(cfg.repetitions):
                        _send_all(sock, payload, cfg.message_bytes)
                except BaseException as exc:  # re-raised in the endpoint thread
                    errors.append(exc)

            t = threading.Thread(target=sender, daemon=True)
            t.start()
            for _ in range(cfg.repetitions):
                _recv_exact(sock, recv_buf, cfg.message_bytes)
            t.join()
            if errors:
                raise errors[0]
        elif role == "a":
            for _ in range(cfg.repetitions):
                _send_all(sock, payload, cfg.message_bytes)
                _recv_exact(sock, ack, 1)
        else:
            for _ in range(cfg.repetitions):
                _recv_exact(sock, recv_buf, cfg.message_bytes)
                sock.sendall(b"\x00")
        self.done[role] = time.perf_counter()


def run_bisection(config: BisectionConfig, timeout: float = 60.0,
                  on_pair: Optional[Callable[[tuple[int, int], int, float], None]] = None) -> BisectionResult:
    """Run all pairs concurrently over loopback sockets.

    ``on_pair(pair, bytes_moved, seconds)`` is called once per pair with the
    raw measurement.
    """
    pairs = [_Pair(p, config, timeout) for p in pair_bisection(config.process_count)]
    payload = memoryview(bytes(min(_CHUNK, config.message_bytes)))
    try:
        try:
            for p in pairs:
                p.connect()
        except OSError as exc:
            raise BisectionError(f"connection failure: {exc}") from exc

        barrier = threading.Barrier(config.process_count + 1, timeout=timeout)
        failures: list[BaseException] = []

        def run(p: _Pair, role: str):
            try:
                p.endpoint(role, payload, barrier)
            except BaseException as exc:
                failures.append(exc)
                barrier.abort()

        threads = [threading.Thread(target=run, args=(p, role), daemon=True)
                   for p in pairs for role in ("a", "b")]
        for t in threads:
            t.start()
        try:
            barrier.wait()
        except threading.BrokenBarrierError:
            pass
        start = time.perf_counter()
        for t in threads:
            t.join(timeout)
        if any(t.is_alive() for t in threads):
            raise BisectionError("timeout waiting for endpoints")
        if failures:
            exc = failures[0]
            if isinstance(exc, socket.timeout):
                raise BisectionError("timeout during exchange") from exc
            raise BisectionError(f"exchange failed: {exc}") from exc
    finally:
        for p in pairs:
            p.close()

    results = []
    for p in pairs:
        seconds = max(max(p.done.values()) - start, time.get_clock_info("perf_counter").resolution)
        if on_pair is not None:
            on_pair(p.pair, config.bytes_per_pair, seconds)
        results.append(PairResult(p.pair, config.bytes_per_pair, seconds))
    return BisectionResult(results, min(r.bandwidth for r in results))


def simulate_bisection(config: BisectionConfig, link_bandwidth: float = DEFAULT_SIM_LINK_BANDWIDTH,
                       seed: int = 0) -> BisectionResult:
    """Deterministic stand-in: each pair gets up to 10 % below ``link_bandwidth``."""
    rng = random.Random(f"bisection:{seed}:{config.process_count}")
    results = []
    for pair in pair_bisection(config.process_count):
        bw = link_bandwidth * (1.0 - 0.1 * rng.random())
        results.append(PairResult(pair, config.bytes_per_pair, config.bytes_per_pair / bw))
    return BisectionResult(results, min(r.bandwidth for r in results))


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="procbench-bisection", description=__doc__)
    p.add_argument("--processes", type=int, required=True)
    p.add_argument("--message-bytes", type=int, default=DEFAULT_MESSAGE_BYTES)
    p.add_argument("--repetitions", type=int, default=1)
    p.add_argument("--unidirectional", action="store_true")
    p.add_argument("--timeout", type=float, default=60.0)
    return p


def invoke(argv: Sequence[str], env: Mapping[str, str], out: TextIO, simulate: bool = False) -> WorkloadResult:
    args = _parser().parse_args(argv)
    try:
        config = BisectionConfig(args.processes, args.message_bytes, args.repetitions,
                                 not args.unidirectional)
    except ValueError as exc:
        emit(out, f"error: {exc}")
        return WorkloadResult(2, 0.0)
    start = time.perf_counter()
    try:
        if simulate:
            link = float(env.get("SIM_LINK_BANDWIDTH", DEFAULT_SIM_LINK_BANDWIDTH))
            result = simulate_bisection(config, link, int(env.get("BENCH_SEED", 0) or 0))
        else:
            result = run_bisection(config, args.timeout)
    except BisectionError as exc:
        emit(out, f"error: {exc}")
        return WorkloadResult(1, time.perf_counter() - start)
    for r in result.pairs:
        emit(out, f"pair {r.pair[0]}-{r.pair[1]}: bytes={r.bytes_moved} seconds={r.seconds!r} "
                  f"bandwidth={r.bandwidth!r} B/s")
    emit(out, f"FOM: min_bisection_bandwidth={result.minimum!r} B/s")
    seconds = max(r.seconds for r in result.pairs) if simulate else time.perf_counter() - start
    return WorkloadResult(0, seconds)


def main(argv=None) -> int:
    return run_main(invoke, argv)


if __name__ == "__main__":
    raise SystemExit(main())
