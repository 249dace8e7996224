"""TSP instance container, random generation, and file I/O.

An instance is a symmetric distance matrix over ``n`` cities, optionally
backed by 2-D coordinates, with an optional set of forbidden city pairs
(the graph is complete by default).  Two on-disk formats are supported:
the toolkit's own JSON document and a small subset of the classic TSPLIB
format (``TYPE: TSP`` with ``EDGE_WEIGHT_TYPE: EUC_2D``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

_COORD_DIST_TOL = 1e-12


def euclidean_distances(coords: np.ndarray) -> np.ndarray:
    """Pairwise Euclidean distance matrix for an (n, 2) coordinate array."""
    coords = np.asarray(coords, dtype=np.float64)
    diff = coords[:, None, :] - coords[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=2))


@dataclass(frozen=True)
class TspInstance:
    """A symmetric TSP instance on ``n`` cities.

    ``non_edges`` lists unordered forbidden pairs; every pair not listed
    is a usable edge, so the default is the complete graph.
    """

    n: int
    dist: np.ndarray
    coords: np.ndarray | None = None
    non_edges: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError(f"need at least 2 cities, got n={self.n}")
        dist = np.asarray(self.dist, dtype=np.float64)
        if dist.shape != (self.n, self.n):
            raise ValueError(f"dist must be {self.n}x{self.n}, got {dist.shape}")
        if not np.allclose(dist, dist.T, atol=0.0, rtol=0.0):
            raise ValueError("dist must be exactly symmetric")
        if np.any(np.diag(dist) != 0.0):
            raise ValueError("dist diagonal must be zero")
        if np.any(dist < 0.0):
            raise ValueError("dist entries must be nonnegative")
        object.__setattr__(self, "dist", dist)
        if self.coords is not None:
            coords = np.asarray(self.coords, dtype=np.float64)
            if coords.shape != (self.n, 2):
                raise ValueError(f"coords must be {self.n}x2, got {coords.shape}")
            implied = euclidean_distances(coords)
            if np.max(np.abs(implied - dist)) > _COORD_DIST_TOL:
                raise ValueError("coords do not reproduce dist within 1e-12")
            object.__setattr__(self, "coords", coords)
        pairs = set()
        for pair in self.non_edges:
            u, v = pair
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"non-edge {pair} out of range for n={self.n}")
            if u == v:
                raise ValueError(f"self-loop {pair} is not a valid pair")
            pairs.add((min(u, v), max(u, v)))
        object.__setattr__(self, "non_edges", frozenset(pairs))

    def has_edge(self, u: int, v: int) -> bool:
        """True if the unordered pair {u, v} is usable (u != v required)."""
        if u == v:
            return False
        return (min(u, v), max(u, v)) not in self.non_edges

    @property
    def edges(self) -> set[tuple[int, int]]:
        """All usable unordered pairs, materialized."""
        return {
            (u, v)
            for u in range(self.n)
            for v in range(u + 1, self.n)
            if (u, v) not in self.non_edges
        }

    def max_distance(self) -> float:
        return float(self.dist.max())

    def mean_distance(self) -> float:
        """Mean off-diagonal distance."""
        n = self.n
        return float(self.dist.sum() / (n * (n - 1)))


def random_instance(n: int, rng: np.random.Generator) -> TspInstance:
    """Uniform random cities in the unit square with Euclidean distances."""
    coords = rng.random((n, 2))
    return TspInstance(n=n, dist=euclidean_distances(coords), coords=coords)


def generate_instances(n: int, count: int, seed: int) -> list[TspInstance]:
    """Batch of seeded random instances; the same seed reproduces the batch."""
    if n < 2 or count < 1:
        raise ValueError(f"need n >= 2 and count >= 1, got n={n} count={count}")
    rng = np.random.default_rng(seed)
    return [random_instance(n, rng) for _ in range(count)]


def save_instance(instance: TspInstance, path: str) -> None:
    """Write an instance as a versioned JSON document."""
    doc: dict = {"format": "tsp-instance", "version": 1, "n": instance.n}
    if instance.coords is not None:
        doc["coords"] = instance.coords.tolist()
    doc["dist"] = instance.dist.tolist()
    if instance.non_edges:
        doc["non_edges"] = sorted(list(p) for p in instance.non_edges)
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def _instance_from_doc(doc: dict) -> TspInstance:
    if doc.get("format") != "tsp-instance":
        raise ValueError("not a tsp-instance document")
    if doc.get("version") != 1:
        raise ValueError(f"unsupported tsp-instance version {doc.get('version')!r}")
    n = int(doc["n"])
    coords = np.asarray(doc["coords"], dtype=np.float64) if "coords" in doc else None
    if "dist" in doc:
        dist = np.asarray(doc["dist"], dtype=np.float64)
    elif coords is not None:
        dist = euclidean_distances(coords)
    else:
        raise ValueError("instance document needs coords or dist")
    non_edges = frozenset(tuple(p) for p in doc.get("non_edges", []))
    return TspInstance(n=n, dist=dist, coords=coords, non_edges=non_edges)


def load_tsplib(path: str) -> TspInstance:
    """Read a TSPLIB file (TYPE: TSP, EDGE_WEIGHT_TYPE: EUC_2D only).

    Distances are kept as exact Euclidean floats rather than rounded to
    integers, so coordinates and the distance matrix stay consistent.
    """
    with open(path) as fh:
        lines = fh.read().splitlines()
    fields: dict[str, str] = {}
    coords: list[tuple[float, float]] = []
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        i += 1
        if not line or line == "EOF":
            continue
        if line == "NODE_COORD_SECTION":
            while i < len(lines):
                entry = lines[i].strip()
                i += 1
                if not entry or entry == "EOF":
                    break
                parts = entry.split()
                coords.append((float(parts[1]), float(parts[2])))
            continue
        if ":" in line:
            key, _, value = line.partition(":")
            fields[key.strip()] = value.strip()
    tsp_type = fields.get("TYPE", "")
    if tsp_type != "TSP":
        raise ValueError(f"unsupported TSPLIB TYPE {tsp_type!r}")
    weight_type = fields.get("EDGE_WEIGHT_TYPE", "")
    if weight_type != "EUC_2D":
        raise ValueError(f"unsupported EDGE_WEIGHT_TYPE {weight_type!r}")
    if not coords:
        raise ValueError("missing NODE_COORD_SECTION")
    dimension = int(fields.get("DIMENSION", len(coords)))
    if dimension != len(coords):
        raise ValueError(f"DIMENSION {dimension} != {len(coords)} coordinates")
    arr = np.asarray(coords, dtype=np.float64)
    return TspInstance(n=len(coords), dist=euclidean_distances(arr), coords=arr)


def load_instance(path: str) -> TspInstance:
    """Load either format: JSON documents or TSPLIB EUC_2D files."""
    with open(path) as fh:
        head = fh.read(1)
    if head == "{":
        with open(path) as fh:
            return _instance_from_doc(json.load(fh))
    return load_tsplib(path)
