"""2D molecular descriptors, drug-likeness checks, and the tabular transform.

Eight descriptors are computed directly from the molecular graph:
molecular weight, topological polar surface area, H-bond donor and
acceptor counts, rotatable-bond count, aromatic-ring count, fraction of
sp3 carbons, and heavy-atom count.  Definitions are spelled out in each
function; they are deliberately explicit substitutes for toolkit
implementations, so results are reproducible against this module rather
than against any particular cheminformatics library.
"""

from __future__ import annotations

import csv
import logging
import math
import multiprocessing
import os
from collections import deque
from dataclasses import dataclass, field

from .errors import MalformedRecordError
from .sdf import AROMATIC_ORDER, MolGraph, parse_molfile, parse_properties, read_blocks

log = logging.getLogger(__name__)

ATOMIC_WEIGHTS = {
    "C": 12.011,
    "H": 1.008,
    "N": 14.007,
    "O": 15.999,
    "S": 32.06,
    "P": 30.974,
    "F": 18.998,
    "Cl": 35.45,
    "Br": 79.904,
    "I": 126.904,
}

DEFAULT_VALENCES = {
    "C": 4,
    "N": 3,
    "O": 2,
    "S": 2,
    "P": 3,
    "F": 1,
    "Cl": 1,
    "Br": 1,
    "I": 1,
    "H": 1,
}

DATASET_COLUMNS = [
    "InChIKey",
    "SMILES",
    "Original_InChI",
    "logP_target",
    "MolWt",
    "TPSA",
    "NumHDonors",
    "NumHAcceptors",
    "NumRotatableBonds",
    "NumAromaticRings",
    "FractionCSP3",
    "HeavyAtomCount",
]

FEATURE_COLUMNS = DATASET_COLUMNS[4:]

#: environment key: (element, charge, num attached H, heavy-bond orders, aromatic)
TpsaTable = dict[tuple[str, int, int, str, bool], float]

# Fragment contributions for polar (N/O) atom environments, Å².
# Bond orders count heavy neighbors only (H folded into the numH slot);
# bonds inside aromatic rings are normalized to order 4 before lookup.
DEFAULT_TPSA_TABLE: TpsaTable = {
    ("N", 0, 0, "1,1,1", False): 3.24,
    ("N", 0, 0, "1,2", False): 12.36,
    ("N", 0, 0, "3", False): 23.79,
    ("N", 0, 0, "1,2,2", False): 11.68,
    ("N", 0, 1, "1,1", False): 12.03,
    ("N", 0, 1, "2", False): 23.85,
    ("N", 0, 2, "1", False): 26.02,
    ("N", 1, 0, "1,1,1,1", False): 0.00,
    ("N", 1, 0, "1,1,2", False): 3.01,
    ("N", 1, 0, "1,3", False): 4.36,
    ("N", 1, 1, "1,1,1", False): 4.44,
    ("N", 1, 1, "1,2", False): 13.97,
    ("N", 1, 2, "1,1", False): 16.61,
    ("N", 1, 2, "2", False): 25.59,
    ("N", 1, 3, "1", False): 27.64,
    ("N", 0, 0, "4,4", True): 12.89,
    ("N", 0, 0, "4,4,4", True): 4.41,
    ("N", 0, 0, "1,4,4", True): 4.93,
    ("N", 0, 0, "2,4,4", True): 8.39,
    ("N", 0, 1, "4,4", True): 15.79,
    ("N", 1, 0, "4,4,4", True): 4.10,
    ("N", 1, 0, "1,4,4", True): 3.88,
    ("N", 1, 1, "4,4", True): 14.14,
    ("O", 0, 0, "1,1", False): 9.23,
    ("O", 0, 0, "2", False): 17.07,
    ("O", 0, 1, "1", False): 20.23,
    ("O", -1, 0, "1", False): 23.06,
    ("O", 0, 0, "4,4", True): 13.14,
}


def load_tpsa_table(path: str | os.PathLike[str]) -> TpsaTable:
    """Read a contribution table: ``element charge numH bond_orders aromatic
    contribution`` per tab-separated line; ``#`` comments allowed."""
    table: TpsaTable = {}
    with open(path, "r", encoding="utf-8") as stream:
        for line_no, raw in enumerate(stream, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 6:
                raise ValueError(f"line {line_no}: expected 6 fields")
            element, charge, num_h, orders, aromatic, contribution = fields
            value = float(contribution)
            if value < 0:
                raise ValueError(f"line {line_no}: negative contribution")
            table[(element, int(charge), int(num_h), orders, aromatic == "1")] = value
    return table


def save_tpsa_table(table: TpsaTable, path: str | os.PathLike[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as out:
        for (element, charge, num_h, orders, aromatic), value in table.items():
            out.write(f"{element}\t{charge}\t{num_h}\t{orders}\t{int(aromatic)}\t{value}\n")


def implicit_hydrogens(graph: MolGraph, atom_index: int) -> int:
    """Hydrogens implied by standard valence minus the explicit bond-order sum.

    Aromatic bonds contribute 1.5 each; a fractional remainder rounds
    down.  Charge adjustments: +1 nitrogen gets valence 4, -1 oxygen
    valence 1.  Unknown elements contribute no hydrogens (warned).
    """
    atom = graph.atoms[atom_index]
    valence = DEFAULT_VALENCES.get(atom.element)
    if valence is None:
        log.warning("no default valence for element %r; assuming 0 implicit H", atom.element)
        return 0
    if atom.element == "N" and atom.charge == 1:
        valence = 4
    elif atom.element == "O" and atom.charge == -1:
        valence = 1
    order_sum = 0.0
    for bond in graph.incident_bonds[atom_index]:
        order_sum += 1.5 if bond.order == AROMATIC_ORDER else bond.order
    return max(0, math.floor(valence - order_sum + 1e-9))


def _connected_components(graph: MolGraph) -> int:
    n = len(graph.atoms)
    seen = [False] * n
    count = 0
    for start in range(n):
        if seen[start]:
            continue
        count += 1
        queue = deque([start])
        seen[start] = True
        while queue:
            u = queue.popleft()
            for v in graph.neighbors[u]:
                if not seen[v]:
                    seen[v] = True
                    queue.append(v)
    return count


def perceive_rings(graph: MolGraph) -> list[tuple[int, ...]]:
    """Minimal cycle basis of the molecular graph, as ordered atom cycles.

    Ring count equals the cyclomatic number (bonds - atoms + components).
    Candidate cycles are gathered Horton-style (shortest path trees from
    every vertex closed by one edge) and reduced greedily, shortest
    first, to an independent set over edge space.
    """
    n = len(graph.atoms)
    edges = sorted({(min(b.a, b.b), max(b.a, b.b)) for b in graph.bonds})
    edge_id = {e: i for i, e in enumerate(edges)}
    target = len(edges) - n + _connected_components(graph)
    if target <= 0:
        return []

    adjacency: list[list[int]] = [[] for _ in range(n)]
    for a, b in edges:
        adjacency[a].append(b)
        adjacency[b].append(a)

    candidates: dict[int, tuple[int, ...]] = {}
    for root in range(n):
        parent = [-1] * n
        dist = [-1] * n
        dist[root] = 0
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for v in adjacency[u]:
                if dist[v] < 0:
                    dist[v] = dist[u] + 1
                    parent[v] = u
                    queue.append(v)

        def path(v: int) -> list[int]:
            out = [v]
            while out[-1] != root:
                out.append(parent[out[-1]])
            out.reverse()
            return out  # root .. v

        for a, b in edges:
            if dist[a] < 0 or dist[b] < 0 or parent[a] == b or parent[b] == a:
                continue
            pa, pb = path(a), path(b)
            if len(set(pa) & set(pb)) != 1:
                continue
            cycle = pa + pb[::-1][:-1]  # root..a, b..(root excluded)
            mask = 0
            ok = True
            for i in range(len(cycle)):
                u, v = cycle[i], cycle[(i + 1) % len(cycle)]
                eid = edge_id.get((min(u, v), max(u, v)))
                if eid is None:
                    ok = False
                    break
                mask |= 1 << eid
            if ok and mask not in candidates:
                candidates[mask] = tuple(cycle)

    ordered = sorted(candidates.items(), key=lambda kv: (kv[0].bit_count(), kv[0]))
    pivots: dict[int, int] = {}
    rings: list[tuple[int, ...]] = []

    def try_add(mask: int, cycle: tuple[int, ...]) -> None:
        m = mask
        while m:
            low = m & (-m)
            if low in pivots:
                m ^= pivots[low]
            else:
                pivots[low] = m
                rings.append(cycle)
                return

    for mask, cycle in ordered:
        try_add(mask, cycle)
        if len(rings) == target:
            return rings

    # backstop: fundamental cycles of a BFS forest always complete a basis
    parent = [-1] * n
    dist = [-1] * n
    for root in range(n):
        if dist[root] >= 0:
            continue
        dist[root] = 0
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for v in adjacency[u]:
                if dist[v] < 0:
                    dist[v] = dist[u] + 1
                    parent[v] = u
                    queue.append(v)
    for a, b in edges:
        if len(rings) == target:
            break
        if parent[a] == b or parent[b] == a:
            continue
        up_a, up_b = [a], [b]
        while up_a[-1] != up_b[-1]:
            if dist[up_a[-1]] >= dist[up_b[-1]]:
                up_a.append(parent[up_a[-1]])
            else:
                up_b.append(parent[up_b[-1]])
        cycle = tuple(up_a[:-1] + up_b[::-1])  # a..meet..b, closed by (a, b)
        mask = 0
        for i in range(len(cycle)):
            u, v = cycle[i], cycle[(i + 1) % len(cycle)]
            mask |= 1 << edge_id[(min(u, v), max(u, v))]
        try_add(mask, cycle)
    return rings


def _ring_bond_orders(graph: MolGraph, ring: tuple[int, ...]) -> list[int]:
    order_of = {(min(b.a, b.b), max(b.a, b.b)): b.order for b in graph.bonds}
    k = len(ring)
    return [order_of[(min(ring[i], ring[(i + 1) % k]), max(ring[i], ring[(i + 1) % k]))] for i in range(k)]


def _is_aromatic_ring(graph: MolGraph, ring: tuple[int, ...]) -> bool:
    orders = _ring_bond_orders(graph, ring)
    if all(o == AROMATIC_ORDER for o in orders):
        return True
    # kekulized fallback: even C/N ring with strictly alternating single/double
    if len(ring) % 2 != 0:
        return False
    if any(graph.atoms[i].element not in ("C", "N") for i in ring):
        return False
    if set(orders) != {1, 2}:
        return False
    return all(orders[i] != orders[(i + 1) % len(orders)] for i in range(len(orders)))


def perceive_aromatic_rings(graph: MolGraph, rings: list[tuple[int, ...]]) -> int:
    return sum(1 for ring in rings if _is_aromatic_ring(graph, ring))


@dataclass(frozen=True)
class DescriptorValues:
    molwt: float
    tpsa: float
    num_h_donors: int
    num_h_acceptors: int
    num_rotatable_bonds: int
    num_aromatic_rings: int
    fraction_csp3: float
    heavy_atom_count: int


def compute_descriptors(
    graph: MolGraph,
    atomic_weights: dict[str, float] | None = None,
    tpsa_table: TpsaTable | None = None,
) -> DescriptorValues:
    """All eight descriptor values for one molecule.

    - MolWt: sum of atomic weights plus 1.008 per implicit hydrogen
    - HeavyAtomCount: non-hydrogen atoms
    - NumHDonors: N/O atoms with at least one attached hydrogen
    - NumHAcceptors: all N and O atoms
    - NumRotatableBonds: single non-ring bonds whose both endpoints have
      two or more heavy neighbors (no amide exclusion)
    - NumAromaticRings: see :func:`perceive_aromatic_rings`
    - FractionCSP3: carbons with only single bonds / total carbons
    - TPSA: contribution-table sum over N/O environments; unmatched
      environments contribute 0 with a warning
    """
    weights = atomic_weights or ATOMIC_WEIGHTS
    table = tpsa_table if tpsa_table is not None else DEFAULT_TPSA_TABLE
    n = len(graph.atoms)
    implicit = [implicit_hydrogens(graph, i) for i in range(n)]

    molwt = 0.0
    heavy = 0
    for i, atom in enumerate(graph.atoms):
        weight = weights.get(atom.element)
        if weight is None:
            log.warning("no atomic weight for element %r; contributing 0", atom.element)
            weight = 0.0
        molwt += weight + 1.008 * implicit[i]
        if atom.element != "H":
            heavy += 1

    attached_h = [
        implicit[i] + sum(1 for j in graph.neighbors[i] if graph.atoms[j].element == "H")
        for i in range(n)
    ]
    donors = sum(
        1 for i, atom in enumerate(graph.atoms) if atom.element in ("N", "O") and attached_h[i] > 0
    )
    acceptors = sum(1 for atom in graph.atoms if atom.element in ("N", "O"))

    rings = perceive_rings(graph)
    aromatic_rings = [ring for ring in rings if _is_aromatic_ring(graph, ring)]
    ring_edges: set[tuple[int, int]] = set()
    for ring in rings:
        for i in range(len(ring)):
            u, v = ring[i], ring[(i + 1) % len(ring)]
            ring_edges.add((min(u, v), max(u, v)))
    aromatic_edges: set[tuple[int, int]] = set()
    aromatic_atoms: set[int] = set()
    for ring in aromatic_rings:
        aromatic_atoms.update(ring)
        for i in range(len(ring)):
            u, v = ring[i], ring[(i + 1) % len(ring)]
            aromatic_edges.add((min(u, v), max(u, v)))

    heavy_degree = [
        sum(1 for j in graph.neighbors[i] if graph.atoms[j].element != "H") for i in range(n)
    ]
    rotatable = 0
    for bond in graph.bonds:
        key = (min(bond.a, bond.b), max(bond.a, bond.b))
        if bond.order != 1 or key in ring_edges:
            continue
        if graph.atoms[bond.a].element == "H" or graph.atoms[bond.b].element == "H":
            continue
        if heavy_degree[bond.a] >= 2 and heavy_degree[bond.b] >= 2:
            rotatable += 1

    carbons = [i for i, atom in enumerate(graph.atoms) if atom.element == "C"]
    if carbons:
        sp3 = sum(
            1
            for i in carbons
            if all(bond.order == 1 for bond in graph.incident_bonds[i])
        )
        fraction_csp3 = sp3 / len(carbons)
    else:
        fraction_csp3 = 0.0

    tpsa = 0.0
    for i, atom in enumerate(graph.atoms):
        if atom.element not in ("N", "O"):
            continue
        orders = []
        for bond in graph.incident_bonds[i]:
            other = bond.b if bond.a == i else bond.a
            if graph.atoms[other].element == "H":
                continue
            key = (min(bond.a, bond.b), max(bond.a, bond.b))
            orders.append(AROMATIC_ORDER if key in aromatic_edges else bond.order)
        env = (
            atom.element,
            atom.charge,
            attached_h[i],
            ",".join(str(o) for o in sorted(orders)),
            i in aromatic_atoms,
        )
        contribution = table.get(env)
        if contribution is None:
            log.warning("no polar-surface contribution for environment %r; contributing 0", env)
        else:
            tpsa += contribution

    return DescriptorValues(
        molwt=molwt,
        tpsa=tpsa,
        num_h_donors=donors,
        num_h_acceptors=acceptors,
        num_rotatable_bonds=rotatable,
        num_aromatic_rings=len(aromatic_rings),
        fraction_csp3=fraction_csp3,
        heavy_atom_count=heavy,
    )


@dataclass(frozen=True)
class LipinskiVerdict:
    passes_molwt: bool
    passes_logp: bool
    passes_donors: bool
    passes_acceptors: bool

    @property
    def compliant(self) -> bool:
        return self.passes_molwt and self.passes_logp and self.passes_donors and self.passes_acceptors


def lipinski_check(molwt: float, logp: float, donors: int, acceptors: int) -> LipinskiVerdict:
    """Rule-of-five verdict; all four thresholds are inclusive."""
    return LipinskiVerdict(
        passes_molwt=molwt <= 500.0,
        passes_logp=logp <= 5.0,
        passes_donors=donors <= 5,
        passes_acceptors=acceptors <= 10,
    )


@dataclass(frozen=True)
class IdTags:
    """Property tags that feed the identifier columns of the dataset."""

    inchikey: str = "PUBCHEM_IUPAC_INCHIKEY"
    smiles: str = "PUBCHEM_OPENEYE_CAN_SMILES"
    inchi: str = "PUBCHEM_IUPAC_INCHI"


@dataclass
class TransformReport:
    input_records: int = 0
    rows_written: int = 0
    excluded: int = 0
    exclusion_reasons: dict[str, int] = field(default_factory=dict)


def _format_real(value: float) -> str:
    return format(value, ".6g")


def descriptor_csv_row(
    block: bytes,
    target_tag: str,
    id_tags: IdTags,
    atomic_weights: dict[str, float] | None = None,
    tpsa_table: TpsaTable | None = None,
) -> tuple[str, ...] | str:
    """One CSV row for a record block, or an exclusion-reason string."""
    try:
        props = parse_properties(block)
        target_text = props.get(target_tag)
        if target_text is None or not target_text.strip():
            return "missing_target"
        target = float(target_text.strip())
        if not math.isfinite(target):
            return "unparseable_target"
        graph = parse_molfile(block)
    except MalformedRecordError:
        return "malformed_record"
    except ValueError:
        return "unparseable_target"
    values = compute_descriptors(graph, atomic_weights, tpsa_table)
    return (
        props.get(id_tags.inchikey, "").strip(),
        props.get(id_tags.smiles, "").strip(),
        props.get(id_tags.inchi, "").strip(),
        _format_real(target),
        _format_real(values.molwt),
        _format_real(values.tpsa),
        str(values.num_h_donors),
        str(values.num_h_acceptors),
        str(values.num_rotatable_bonds),
        str(values.num_aromatic_rings),
        _format_real(values.fraction_csp3),
        str(values.heavy_atom_count),
    )


class _RowWorker:
    """Picklable per-block worker for the multiprocessing pool."""

    def __init__(self, target_tag: str, id_tags: IdTags, tpsa_table: TpsaTable | None):
        self.target_tag = target_tag
        self.id_tags = id_tags
        self.tpsa_table = tpsa_table

    def __call__(self, block: bytes) -> tuple[str, ...] | str:
        return descriptor_csv_row(block, self.target_tag, self.id_tags, None, self.tpsa_table)


def transform_dataset(
    input_sdf: str | os.PathLike[str],
    output_csv: str | os.PathLike[str],
    target_tag: str = "PUBCHEM_XLOGP3",
    id_tags: IdTags | None = None,
    workers: int = 1,
    tpsa_table: TpsaTable | None = None,
) -> TransformReport:
    """Turn an SDF file into the 12-column descriptor dataset.

    A producer streams record blocks; a worker pool computes rows; rows
    are written back in input order, so the output file is byte-identical
    for any worker count.  Records without a parseable target value are
    excluded and counted (written rows + excluded = input records); all
    emitted cells are populated.
    """
    tags = id_tags or IdTags()
    report = TransformReport()
    worker = _RowWorker(target_tag, tags, tpsa_table)

    def blocks():
        with open(input_sdf, "rb") as stream:
            for _offset, _length, block in read_blocks(stream):
                yield block

    with open(output_csv, "w", encoding="utf-8", newline="") as out:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(DATASET_COLUMNS)
        if workers <= 1:
            results = map(worker, blocks())
            pool = None
        else:
            pool = multiprocessing.Pool(processes=workers)
            results = pool.imap(worker, blocks(), chunksize=256)
        try:
            for outcome in results:
                report.input_records += 1
                if isinstance(outcome, str):
                    report.excluded += 1
                    report.exclusion_reasons[outcome] = (
                        report.exclusion_reasons.get(outcome, 0) + 1
                    )
                else:
                    writer.writerow(outcome)
                    report.rows_written += 1
        finally:
            if pool is not None:
                pool.close()
                pool.join()
    return report
