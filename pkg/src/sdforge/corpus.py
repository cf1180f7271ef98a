"""Synthetic SDF corpus generation with known ground truth.

Two generators:

* :func:`generate_corpus` builds a multi-source corpus of valid V2000
  records with a planted common core, planted short-key collisions, and
  target values from a documented generative model.  A JSON manifest
  records everything the generator knows, so tests can verify pipeline
  output against ground truth instead of re-deriving it.
* :func:`generate_benchmark_corpus` builds large single-source corpora
  of minimal records, tuned for indexing / extraction benchmarks.

Target model (per record, from its descriptor vector d and a per-record
standard normal draw eps):

    f(d)   = 0.016 MolWt - 0.025 TPSA + 0.55 NumAromaticRings
             - 0.28 NumHDonors + 0.9 FractionCSP3
             + 0.05 NumRotatableBonds - 0.2
    sigma  = noise_scale * (1 + hetero_strength * |f(d) - 2.0|)
    target = f(d) + sigma * eps
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .descriptors import DescriptorValues, compute_descriptors
from .sdf import Atom, Bond, MolGraph, format_molfile

TAG_FULL_ID = "PUBCHEM_IUPAC_INCHI"
TAG_SHORT_KEY = "PUBCHEM_IUPAC_INCHIKEY"
TAG_SMILES = "PUBCHEM_OPENEYE_CAN_SMILES"
TAG_TARGET = "PUBCHEM_XLOGP3"

TARGET_FORMULA = (
    "0.016*MolWt - 0.025*TPSA + 0.55*NumAromaticRings - 0.28*NumHDonors"
    " + 0.9*FractionCSP3 + 0.05*NumRotatableBonds - 0.2"
)


def target_mean(d: DescriptorValues) -> float:
    return (
        0.016 * d.molwt
        - 0.025 * d.tpsa
        + 0.55 * d.num_aromatic_rings
        - 0.28 * d.num_h_donors
        + 0.9 * d.fraction_csp3
        + 0.05 * d.num_rotatable_bonds
        - 0.2
    )


def target_sigma(f: float, hetero_strength: float, noise_scale: float) -> float:
    return noise_scale * (1.0 + hetero_strength * abs(f - 2.0))


@dataclass(frozen=True)
class CorpusSpec:
    sources: int = 3
    records_per_source: int = 5000
    common_core: int = 1200
    collision_groups: int = 3
    collision_group_size: int = 2
    missing_target_fraction: float = 0.02
    hetero_strength: float = 0.5
    noise_scale: float = 0.25


@dataclass
class RecordTruth:
    serial: int
    full_id: str
    short_key: str
    sources: list[int]
    has_target: bool
    descriptors: dict
    noise: float
    sigma: float
    target: float


@dataclass
class CorpusManifest:
    seed: int
    spec: CorpusSpec
    source_paths: list[str]
    core_ids: list[str]
    collision_groups: list[dict]
    target_formula: str = TARGET_FORMULA
    records: list[RecordTruth] = field(default_factory=list)

    def save(self, path: str | os.PathLike[str]) -> None:
        payload = {
            "seed": self.seed,
            "spec": asdict(self.spec),
            "source_paths": self.source_paths,
            "core_ids": self.core_ids,
            "collision_groups": self.collision_groups,
            "target_formula": self.target_formula,
            "records": [asdict(r) for r in self.records],
        }
        with open(path, "w", encoding="utf-8") as out:
            json.dump(payload, out)

    @classmethod
    def load(cls, path: str | os.PathLike[str]) -> "CorpusManifest":
        with open(path, "r", encoding="utf-8") as stream:
            payload = json.load(stream)
        manifest = cls(
            seed=payload["seed"],
            spec=CorpusSpec(**payload["spec"]),
            source_paths=payload["source_paths"],
            core_ids=payload["core_ids"],
            collision_groups=payload["collision_groups"],
            target_formula=payload["target_formula"],
        )
        manifest.records = [RecordTruth(**r) for r in payload["records"]]
        return manifest


def _short_key_for(full_id: str) -> str:
    digest = hashlib.sha256(full_id.encode()).hexdigest()
    letters = "".join(chr(ord("A") + int(c, 16) % 16) for c in digest[:24])
    return f"{letters[:14]}-{letters[14:24]}-N"


def build_molecule(rng: np.random.Generator) -> MolGraph:
    """One random, valence-consistent small molecule.

    A carbon chain seeds the graph; decorations (hydroxyl, amine,
    carbonyl, halogen) and aromatic six-rings (sometimes with one ring
    nitrogen) attach where free valence allows.  A small fraction of
    molecules are "polyol extremes" carrying 6+ hydroxyls, which plants
    rule-of-five violators in the population.
    """
    atoms: list[Atom] = []
    bonds: list[Bond] = []
    capacity: list[int] = []

    def add_atom(element: str, valence: int) -> int:
        atoms.append(Atom(element))
        capacity.append(valence)
        return len(atoms) - 1

    def add_bond(a: int, b: int, order: int, cost: int | None = None) -> None:
        use = cost if cost is not None else order
        bonds.append(Bond(a, b, order))
        capacity[a] -= use
        capacity[b] -= use

    polyol = rng.random() < 0.08
    chain_len = int(rng.integers(6, 11)) if polyol else int(rng.integers(1, 7))
    chain = [add_atom("C", 4) for _ in range(chain_len)]
    for i in range(chain_len - 1):
        add_bond(chain[i], chain[i + 1], 1)

    if polyol:
        n_oh = int(rng.integers(6, 9))
        placed = 0
        for c in chain:
            while capacity[c] >= 1 and placed < n_oh:
                add_bond(c, add_atom("O", 2), 1)
                placed += 1
    else:
        for _ in range(int(rng.integers(0, 3))):
            sites = [c for c in chain if capacity[c] >= 1]
            if not sites:
                break
            carbon = int(sites[rng.integers(0, len(sites))])
            kind = rng.random()
            if kind < 0.30:
                add_bond(carbon, add_atom("O", 2), 1)  # hydroxyl
            elif kind < 0.50:
                add_bond(carbon, add_atom("N", 3), 1)  # amine
            elif kind < 0.70 and capacity[carbon] >= 2:
                add_bond(carbon, add_atom("O", 2), 2)  # carbonyl
            elif kind < 0.85:
                add_bond(carbon, add_atom("Cl", 1), 1)
            else:
                ether_o = add_atom("O", 2)
                add_bond(carbon, ether_o, 1)
                add_bond(ether_o, add_atom("C", 4), 1)  # methoxy

    n_rings = int(rng.integers(0, 4)) if not polyol else 0
    for _ in range(n_rings):
        with_nitrogen = rng.random() < 0.3
        n_pos = int(rng.integers(2, 5)) if with_nitrogen else -1
        ring = [
            add_atom("N" if pos == n_pos else "C", 3 if pos == n_pos else 4)
            for pos in range(6)
        ]
        for pos in range(6):
            # aromatic bonds: 1.5 each; track capacity in halves is overkill,
            # so charge each ring atom 3 for its two ring bonds up front
            bonds.append(Bond(ring[pos], ring[(pos + 1) % 6], 4))
        for pos in range(6):
            capacity[ring[pos]] -= 3
        sites = [c for c in chain if capacity[c] >= 1]
        if sites and capacity[ring[0]] >= 1:
            carbon = int(sites[rng.integers(0, len(sites))])
            add_bond(carbon, ring[0], 1)

    return MolGraph(atoms=tuple(atoms), bonds=tuple(bonds))


def _record_bytes(
    name: str,
    graph: MolGraph,
    properties: list[tuple[str, str]],
) -> bytes:
    parts = [format_molfile(graph, name=name)]
    for tag, value in properties:
        parts.append(f"> <{tag}>\n{value}\n\n".encode())
    parts.append(b"$$$$\n")
    return b"".join(parts)


def generate_corpus(
    spec: CorpusSpec,
    out_dir: str | os.PathLike[str],
    seed: int = 0,
) -> CorpusManifest:
    """Write ``spec.sources`` SDF files plus a ground-truth manifest.

    Serials below ``common_core`` appear in every source (the planted
    intersection); the rest are unique to one source.  Collision groups
    are planted among the first source's unique records by overriding
    their short keys with a shared value.  The same serial always maps
    to the same molecule and target, whichever source carries it.
    """
    if spec.common_core > spec.records_per_source:
        raise ValueError("common core cannot exceed records per source")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    per_source_unique = spec.records_per_source - spec.common_core
    total = spec.common_core + spec.sources * per_source_unique

    truths: list[RecordTruth] = []
    graphs: dict[int, MolGraph] = {}
    blocks: dict[int, bytes] = {}
    for serial in range(total):
        rng = np.random.default_rng([seed, serial])
        graph = build_molecule(rng)
        graphs[serial] = graph
        values = compute_descriptors(graph)
        f = target_mean(values)
        sigma = target_sigma(f, spec.hetero_strength, spec.noise_scale)
        noise = float(rng.normal())
        target = f + sigma * noise
        has_target = bool(rng.random() >= spec.missing_target_fraction)
        full_id = f"SYN=1S/C{values.heavy_atom_count}O0/i{serial:07d},t{seed}"
        short_key = _short_key_for(full_id)
        if serial < spec.common_core:
            sources = list(range(spec.sources))
        else:
            sources = [(serial - spec.common_core) // per_source_unique]
        truths.append(
            RecordTruth(
                serial=serial,
                full_id=full_id,
                short_key=short_key,
                sources=sources,
                has_target=has_target,
                descriptors=asdict(values),
                noise=noise,
                sigma=sigma,
                target=target,
            )
        )

    # plant short-key collisions among source-0 unique records
    collision_groups: list[dict] = []
    if spec.collision_groups:
        if per_source_unique < spec.collision_groups * spec.collision_group_size:
            raise ValueError("not enough unique records to plant the requested collisions")
        pool = [t for t in truths if t.sources == [0]]
        pick = 0
        for _ in range(spec.collision_groups):
            members = pool[pick : pick + spec.collision_group_size]
            pick += spec.collision_group_size
            shared = members[0].short_key
            for member in members:
                member.short_key = shared
            collision_groups.append(
                {"short_key": shared, "full_ids": [m.full_id for m in members]}
            )

    for truth in truths:
        graph = graphs[truth.serial]
        smiles = "".join(a.element for a in graph.atoms)
        props = [
            (TAG_FULL_ID, truth.full_id),
            (TAG_SHORT_KEY, truth.short_key),
            (TAG_SMILES, smiles),
        ]
        if truth.has_target:
            props.append((TAG_TARGET, repr(truth.target)))
        blocks[truth.serial] = _record_bytes(f"SYN-{truth.serial:07d}", graph, props)

    source_paths: list[str] = []
    order_rng = np.random.default_rng([seed, 10**9])
    for s in range(spec.sources):
        serials = [t.serial for t in truths if s in t.sources]
        order_rng.shuffle(serials)
        path = out / f"source_{s + 1}.sdf"
        with open(path, "wb") as sink:
            for serial in serials:
                sink.write(blocks[serial])
        source_paths.append(str(path))

    manifest = CorpusManifest(
        seed=seed,
        spec=spec,
        source_paths=source_paths,
        core_ids=[t.full_id for t in truths if t.serial < spec.common_core],
        collision_groups=collision_groups,
        records=truths,
    )
    manifest.save(out / "truth_manifest.json")
    return manifest


_BENCH_GRAPH = MolGraph(
    atoms=(Atom("C"), Atom("C"), Atom("O")),
    bonds=(Bond(0, 1, 1), Bond(1, 2, 1)),
)


def generate_benchmark_corpus(
    out_dir: str | os.PathLike[str],
    n_files: int = 4,
    records_per_file: int = 50_000,
    seed: int = 0,
) -> tuple[list[str], list[str]]:
    """Large flat corpus of minimal records for index/extraction benchmarks.

    Every record reuses one tiny connection table and carries a unique
    full identifier (commas included, as real canonical identifiers
    have).  Returns (file paths, all identifiers in write order).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    body = format_molfile(_BENCH_GRAPH, name="").split(b"\n", 1)[1]
    paths: list[str] = []
    identifiers: list[str] = []
    serial = 0
    for file_idx in range(n_files):
        path = out / f"bench_{file_idx + 1}.sdf"
        chunks: list[bytes] = []
        for _ in range(records_per_file):
            full = f"SYN=1S/BM{seed}-{serial:08d},f{file_idx}"
            identifiers.append(full)
            chunks.append(
                b"BM-%08d\n%s> <%s>\n%s\n\n$$$$\n"
                % (serial, body, TAG_FULL_ID.encode(), full.encode())
            )
            serial += 1
        with open(path, "wb") as sink:
            sink.write(b"".join(chunks))
        paths.append(str(path))
    return paths, identifiers
