"""Procurement arithmetic: partition sizing, memory variants, TCO and value for money."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .specmodel import as_number, load_yaml, variant_budgets

VARIANT_ORDER = ("T", "S", "M", "L")


class ProcurementError(ValueError):
    pass


class NoVariantFits(ProcurementError):
    pass


class MissingCommitment(ProcurementError):
    pass


def _positive(name: str, value) -> None:
    if not value > 0:
        raise ProcurementError(f"{name} must be positive, got {value!r}")


@dataclass(frozen=True)
class SystemModel:
    name: str
    nodes: int
    node_peak_flops: float
    devices_per_node: int
    device_memory_bytes: int
    avg_power_watts: float
    capex_currency: float
    energy_price_per_kwh: float
    lifetime_hours: float
    availability: float = 1.0

    def __post_init__(self):
        for attr in ("nodes", "node_peak_flops", "devices_per_node", "device_memory_bytes"):
            _positive(attr, getattr(self, attr))
        for attr in ("capex_currency", "avg_power_watts", "energy_price_per_kwh", "lifetime_hours"):
            if not getattr(self, attr) >= 0:
                raise ProcurementError(f"{attr} must be non-negative, got {getattr(self, attr)!r}")
        if not 0 < self.availability <= 1:
            raise ProcurementError(f"availability must lie in (0, 1], got {self.availability!r}")

    @property
    def peak_flops(self) -> float:
        return self.nodes * self.node_peak_flops

    @property
    def devices(self) -> int:
        return self.nodes * self.devices_per_node


@dataclass(frozen=True)
class ReferenceEntry:
    benchmark: str
    reference_nodes: int
    reference_runtime_seconds: float
    weight: float = 1.0

    def __post_init__(self):
        _positive("reference_nodes", self.reference_nodes)
        _positive("reference_runtime_seconds", self.reference_runtime_seconds)
        if self.weight < 0:
            raise ProcurementError(f"weight must be non-negative, got {self.weight!r}")


@dataclass(frozen=True)
class Commitment:
    benchmark: str
    committed_runtime_seconds: float
    committed_nodes: int
    chosen_variant: Optional[str] = None

    def __post_init__(self):
        _positive("committed_runtime_seconds", self.committed_runtime_seconds)
        if self.committed_nodes < 1:
            raise ProcurementError("committed_nodes must be >= 1")


@dataclass(frozen=True)
class MemoryVariantTable:
    """Per-device footprints (bytes) of the T/S/M/L variants on the reference system."""

    footprints: dict[str, int]
    reference_devices: int
    workload_scale_factor: float = 1.0

    def __post_init__(self):
        present = [v for v in VARIANT_ORDER if v in self.footprints]
        if not present or set(self.footprints) - set(VARIANT_ORDER):
            raise ProcurementError(f"footprints must be keyed by {VARIANT_ORDER}")
        sizes = [self.footprints[v] for v in present]
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ProcurementError("footprints must increase strictly from T to L")
        _positive("reference_devices", self.reference_devices)
        _positive("workload_scale_factor", self.workload_scale_factor)

    @classmethod
    def canonical(cls, reference_device_memory_bytes: int, reference_devices: int,
                  workload_scale_factor: float = 1.0) -> "MemoryVariantTable":
        """Footprints at 25/50/75/100 % of the reference device memory."""
        return cls(variant_budgets(reference_device_memory_bytes), reference_devices,
                   workload_scale_factor)


@dataclass
class BenchmarkEvaluation:
    benchmark: str
    weight: float
    committed_runtime_seconds: float
    committed_nodes: int
    runs: float
    reference_runs: float

    @property
    def normalized_throughput(self) -> float:
        return self.runs / self.reference_runs

    @property
    def contribution(self) -> float:
        return self.weight * self.normalized_throughput


@dataclass
class EvaluationReport:
    proposal: str
    benchmarks: list[BenchmarkEvaluation]
    high_scaling_ratios: dict[str, float]
    value: float
    tco_currency: float
    value_for_money: float
    flags: list[str] = field(default_factory=list)

    @property
    def normalized_throughput(self) -> dict[str, float]:
        return {b.benchmark: b.normalized_throughput for b in self.benchmarks}


def size_partition(target_flops: float, node_peak_flops: float, constraint: str = "none") -> int:
    """Node count filling ``target_flops`` without exceeding it.

    ``constraint="power_of_two"`` takes the largest power of two not above
    the unconstrained count.
    """
    _positive("target_flops", target_flops)
    _positive("node_peak_flops", node_peak_flops)
    nodes = math.floor(Fraction(target_flops) / Fraction(node_peak_flops))
    if nodes < 1:
        raise ProcurementError("target is smaller than one node's peak: empty partition")
    if constraint == "none":
        return nodes
    if constraint == "power_of_two":
        return 1 << (nodes.bit_length() - 1)
    raise ProcurementError(f"unknown constraint {constraint!r}")


@dataclass(frozen=True)
class ScaledPartition:
    target_flops: float
    nodes: Optional[float]


def exascale_partition(reference_partition_nodes: int, scale_factor: float,
                       reference_node_peak_flops: float,
                       proposal_node_peak_flops: Optional[float] = None) -> ScaledPartition:
    """Compute target of a ``scale_factor``-times larger partition.

    ``nodes`` is the (fractional) node-equivalent on a proposal with the given
    per-node peak, or the reference-node equivalent when none is given.
    """
    _positive("scale_factor", scale_factor)
    _positive("reference_partition_nodes", reference_partition_nodes)
    target = reference_partition_nodes * reference_node_peak_flops * scale_factor
    per_node = proposal_node_peak_flops if proposal_node_peak_flops is not None else reference_node_peak_flops
    _positive("node_peak_flops", per_node)
    return ScaledPartition(target, target / per_node)


def proposal_footprints(table: MemoryVariantTable, proposal: SystemModel,
                        proposal_partition_nodes: int) -> dict[str, Fraction]:
    """Per-device footprint of every variant once scaled up and spread over the proposal partition."""
    devices = proposal_partition_nodes * proposal.devices_per_node
    _positive("proposal devices", devices)
    factor = Fraction(table.workload_scale_factor) * table.reference_devices / devices
    return {v: table.footprints[v] * factor for v in VARIANT_ORDER if v in table.footprints}


def select_memory_variant(table: MemoryVariantTable, proposal: SystemModel,
                          proposal_partition_nodes: int) -> str:
    """Largest variant whose scaled per-device footprint fits the proposal's device memory."""
    fitting = [v for v, size in proposal_footprints(table, proposal, proposal_partition_nodes).items()
               if size <= proposal.device_memory_bytes]
    if not fitting:
        raise NoVariantFits(f"no memory variant fits {proposal.device_memory_bytes} bytes per device")
    return fitting[-1]


def statevector_memory(n_qubits: int) -> int:
    """Bytes of a double-precision complex state vector over ``n_qubits`` qubits."""
    if not isinstance(n_qubits, int) or isinstance(n_qubits, bool) or n_qubits < 1:
        raise ProcurementError(f"n_qubits must be a positive integer, got {n_qubits!r}")
    return 16 << n_qubits


def high_scaling_ratio(commitment: Commitment, reference: ReferenceEntry) -> float:
    """Committed over reference runtime; below one is an improvement."""
    return commitment.committed_runtime_seconds / reference.reference_runtime_seconds


def tco(system: SystemModel) -> float:
    """Capital expense plus lifetime energy cost (cooling folded into the power figure)."""
    energy_kwh = system.avg_power_watts / 1000.0 * system.lifetime_hours * system.availability
    return system.capex_currency + energy_kwh * system.energy_price_per_kwh


def lifetime_runs(system: SystemModel, runtime_seconds: float, nodes_per_run: int) -> float:
    """Runs completed over the lifetime when the machine is packed with concurrent copies."""
    seconds = system.lifetime_hours * 3600.0 * system.availability
    return seconds / runtime_seconds * (system.nodes / nodes_per_run)


def evaluate_value_for_money(references: Sequence[ReferenceEntry],
                             commitments: Iterable[Commitment],
                             proposal: SystemModel,
                             reference_system: SystemModel,
                             high_scaling_references: Sequence[ReferenceEntry] = (),
                             high_scaling_commitments: Iterable[Commitment] = ()) -> EvaluationReport:
    """Weighted lifetime throughput of ``proposal``, normalized to the reference system, over TCO.

    For each benchmark the runs over the proposal's lifetime are divided by
    the runs the reference system achieves at the reference runtime and node
    count, so the reference system scores exactly the sum of the weights.
    """
    if not reference_system.lifetime_hours > 0:
        raise ProcurementError("reference system needs a positive lifetime to normalize against")
    by_name = {c.benchmark: c for c in commitments}
    missing = [r.benchmark for r in references if r.benchmark not in by_name]
    if missing:
        raise MissingCommitment(f"{proposal.name}: no commitment for {', '.join(missing)}")

    rows = []
    for ref in references:
        c = by_name[ref.benchmark]
        rows.append(BenchmarkEvaluation(
            benchmark=ref.benchmark,
            weight=ref.weight,
            committed_runtime_seconds=c.committed_runtime_seconds,
            committed_nodes=c.committed_nodes,
            runs=lifetime_runs(proposal, c.committed_runtime_seconds, c.committed_nodes),
            reference_runs=lifetime_runs(reference_system, ref.reference_runtime_seconds,
                                         ref.reference_nodes),
        ))
    value = sum(r.contribution for r in rows)

    hs_by_name = {c.benchmark: c for c in high_scaling_commitments}
    hs_missing = [r.benchmark for r in high_scaling_references if r.benchmark not in hs_by_name]
    if hs_missing:
        raise MissingCommitment(f"{proposal.name}: no high-scaling commitment for {', '.join(hs_missing)}")
    ratios = {r.benchmark: high_scaling_ratio(hs_by_name[r.benchmark], r) for r in high_scaling_references}

    flags = []
    if not any(r.weight > 0 for r in references):
        flags.append("zero-weight suite: value is 0")
    cost = tco(proposal)
    return EvaluationReport(proposal.name, rows, ratios, value, cost, value / cost, flags)


def rank_proposals(reports: Iterable[EvaluationReport]) -> list[EvaluationReport]:
    """Best value for money first; ties keep input order."""
    return sorted(reports, key=lambda r: -r.value_for_money)


# --------------------------------------------------------------------------
# model files

@dataclass(frozen=True)
class Proposal:
    system: SystemModel
    commitments: tuple[Commitment, ...]
    high_scaling_commitments: tuple[Commitment, ...] = ()


@dataclass(frozen=True)
class ProcurementModel:
    reference_system: SystemModel
    references: tuple[ReferenceEntry, ...]
    proposals: tuple[Proposal, ...]
    high_scaling_references: tuple[ReferenceEntry, ...] = ()


_INT_FIELDS = {"nodes", "devices_per_node", "device_memory_bytes", "reference_nodes", "committed_nodes"}


def _build(cls, where: str, data) -> object:
    if not isinstance(data, dict):
        raise ProcurementError(f"{where}: expected a mapping")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ProcurementError(f"{where}: unknown field(s) {', '.join(sorted(map(str, unknown)))}")
    kwargs = {}
    for key, value in data.items():
        if key in ("name", "benchmark", "chosen_variant"):
            kwargs[key] = None if value is None else str(value)
            continue
        value = as_number(value)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ProcurementError(f"{where}: {key} must be a number, got {value!r}")
        if key in _INT_FIELDS:
            if value != int(value):
                raise ProcurementError(f"{where}: {key} must be an integer, got {value!r}")
            value = int(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ProcurementError(f"{where}: {exc}") from exc


def _list(data: dict, key: str, required: bool = True) -> list:
    value = data.get(key)
    if value is None:
        if required:
            raise ProcurementError(f"missing section {key!r}")
        return []
    if not isinstance(value, list):
        raise ProcurementError(f"{key}: expected a list")
    return value


def parse_procurement_model(text: str) -> ProcurementModel:
    """Parse a YAML procurement model (reference system, references, proposals)."""
    data = load_yaml(text)
    if not isinstance(data, dict):
        raise ProcurementError("procurement model must be a mapping")
    unknown = set(data) - {"reference_system", "references", "high_scaling_references", "proposals"}
    if unknown:
        raise ProcurementError(f"unknown section(s) {', '.join(sorted(map(str, unknown)))}")
    if "reference_system" not in data:
        raise ProcurementError("missing section 'reference_system'")
    ref_system = _build(SystemModel, "reference_system", data["reference_system"])
    refs = tuple(_build(ReferenceEntry, f"references[{i}]", r) for i, r in enumerate(_list(data, "references")))
    hs_refs = tuple(_build(ReferenceEntry, f"high_scaling_references[{i}]", r)
                    for i, r in enumerate(_list(data, "high_scaling_references", required=False)))
    proposals = []
    for i, raw in enumerate(_list(data, "proposals")):
        where = f"proposals[{i}]"
        if not isinstance(raw, dict) or "system" not in raw:
            raise ProcurementError(f"{where}: needs a 'system' mapping")
        unknown = set(raw) - {"system", "commitments", "high_scaling_commitments"}
        if unknown:
            raise ProcurementError(f"{where}: unknown field(s) {', '.join(sorted(map(str, unknown)))}")
        proposals.append(Proposal(
            _build(SystemModel, f"{where}.system", raw["system"]),
            tuple(_build(Commitment, f"{where}.commitments[{j}]", c)
                  for j, c in enumerate(_list(raw, "commitments"))),
            tuple(_build(Commitment, f"{where}.high_scaling_commitments[{j}]", c)
                  for j, c in enumerate(_list(raw, "high_scaling_commitments", required=False))),
        ))
    if not proposals:
        raise ProcurementError("no proposals to evaluate")
    names = [r.benchmark for r in refs]
    if len(set(names)) != len(names):
        raise ProcurementError("duplicate benchmark in references")
    return ProcurementModel(ref_system, refs, tuple(proposals), hs_refs)


def evaluate_model(model: ProcurementModel) -> list[EvaluationReport]:
    """Evaluate every proposal, best value for money first."""
    return rank_proposals(
        evaluate_value_for_money(model.references, p.commitments, p.system, model.reference_system,
                                 model.high_scaling_references, p.high_scaling_commitments)
        for p in model.proposals
    )
