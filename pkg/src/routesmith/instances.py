"""Random instance generation, bit-exact text serialization, and splits.

File format v1 (line-oriented, one node per row)::

    routesmith-instance v1
    problem cvrp
    nodes 501
    capacity 50
    checksum <sha256 of the node table text>
    columns id x y demand tw_start tw_end service prize
    0 0.5227936331221675 0.698329957468804 0 0.0 inf 0.0 0.0
    1 ...

Floats are written with ``repr`` (shortest round-tripping decimal), so a
load/save cycle reproduces coordinates exactly, and the distance matrix,
recomputed from coordinates with a fixed expression, comes back bit for
bit. Generation uses PCG64 exclusively, never the platform default RNG.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, InstanceError, InstanceFormatError
from .model import Instance, Problem
from .util import derive_seed, make_rng, sha256_hex

FORMAT_HEADER = "routesmith-instance v1"


@dataclass(frozen=True)
class GenParams:
    problem: Problem = Problem.CVRP
    n: int = 100
    seed: int = 0
    capacity: int = 50
    demand_range: tuple[int, int] = (1, 9)
    # VRPTW: planning horizon and window-width bounds
    horizon: float = 4.6
    tw_width_range: tuple[float, float] = (0.1, 0.3)
    service_time: float = 0.2
    # PCVRP: prizes uniform in (lo, hi]
    prize_range: tuple[float, float] = (0.0, 0.1)

    def check(self) -> None:
        lo, hi = self.demand_range
        if self.n < 1:
            raise ConfigError("n must be at least 1")
        if lo < 1 or hi < lo:
            raise ConfigError("demand_range must satisfy 1 <= lo <= hi")
        if hi > self.capacity:
            raise ConfigError("demands must not exceed capacity")
        if self.horizon <= 0:
            raise ConfigError("horizon must be positive")
        wlo, whi = self.tw_width_range
        if not (0 < wlo <= whi < self.horizon):
            raise ConfigError("tw_width_range must lie inside (0, horizon)")
        plo, phi = self.prize_range
        if plo < 0 or phi <= plo:
            raise ConfigError("prize_range must satisfy 0 <= lo < hi")


def generate(params: GenParams) -> Instance:
    """Deterministically generate an instance from params.seed.

    Coordinates are uniform in the unit square; VRPTW windows are shifted
    so a direct drive from the depot always arrives no later than the
    window end, keeping the one-tour-per-customer start feasible.
    """
    params.check()
    rng = make_rng(params.seed)
    m = params.n + 1
    coords = rng.random((m, 2))
    demand = np.zeros(m, dtype=np.int64)
    lo, hi = params.demand_range
    demand[1:] = rng.integers(lo, hi + 1, size=params.n)

    service = tw_start = tw_end = prize = None
    if params.problem is Problem.VRPTW:
        service = np.zeros(m)
        service[1:] = params.service_time
        wlo, whi = params.tw_width_range
        width = rng.uniform(wlo, whi, size=params.n)
        start = rng.uniform(0.0, params.horizon - width)
        d0 = np.sqrt(((coords[1:] - coords[0]) ** 2).sum(axis=1))
        start = np.maximum(start, np.minimum(d0 - width, params.horizon - width))
        start = np.maximum(start, 0.0)
        tw_start = np.zeros(m)
        tw_end = np.zeros(m)
        tw_start[1:] = start
        # exact clamp: a direct drive must arrive no later than the window end
        tw_end[1:] = np.maximum(start + width, d0)
        tw_end[0] = params.horizon
    elif params.problem is Problem.PCVRP:
        plo, phi = params.prize_range
        prize = np.zeros(m)
        prize[1:] = plo + (phi - plo) * (1.0 - rng.random(params.n))

    try:
        return Instance(
            params.problem,
            coords,
            demand,
            params.capacity,
            service=service,
            tw_start=tw_start,
            tw_end=tw_end,
            prize=prize,
        )
    except InstanceError as exc:
        raise InstanceError(f"generation with seed {params.seed} failed: {exc}") from exc


def _fmt(x: float) -> str:
    return repr(float(x))


def save(instance: Instance, path) -> Path:
    """Write the v1 text format; returns the path."""
    path = Path(path)
    m = instance.num_customers + 1
    rows = []
    for i in range(m):
        rows.append(
            " ".join(
                [
                    str(i),
                    _fmt(instance.coords[i, 0]),
                    _fmt(instance.coords[i, 1]),
                    str(int(instance.demand[i])),
                    _fmt(instance.tw_start[i]),
                    _fmt(instance.tw_end[i]),
                    _fmt(instance.service[i]),
                    _fmt(instance.prize[i]),
                ]
            )
        )
    table = "\n".join(rows) + "\n"
    header = "\n".join(
        [
            FORMAT_HEADER,
            f"problem {instance.problem.value}",
            f"nodes {m}",
            f"capacity {instance.capacity}",
            f"checksum {sha256_hex(table)}",
            "columns id x y demand tw_start tw_end service prize",
        ]
    )
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(header + "\n" + table)
    return path


def load(path) -> Instance:
    """Read the v1 text format; verifies the node-table checksum."""
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or lines[0] != FORMAT_HEADER:
        raise InstanceFormatError(f"not a {FORMAT_HEADER} file: {path}", line=1)
    meta = {}
    table_start = None
    for ln, line in enumerate(lines[1:6], start=2):
        parts = line.split(maxsplit=1)
        if len(parts) != 2:
            raise InstanceFormatError(f"malformed header line {line!r}", line=ln)
        meta[parts[0]] = parts[1]
        if parts[0] == "columns":
            table_start = ln
            break
    for key in ("problem", "nodes", "capacity", "checksum", "columns"):
        if key not in meta:
            raise InstanceFormatError(f"missing header field {key!r}")
    problem = Problem.parse(meta["problem"])
    m = int(meta["nodes"])
    table_lines = lines[table_start:]
    if len(table_lines) != m:
        raise InstanceFormatError(
            f"expected {m} node rows, found {len(table_lines)}",
            line=table_start + 1 + len(table_lines),
        )
    table = "\n".join(table_lines) + "\n"
    if sha256_hex(table) != meta["checksum"]:
        raise InstanceFormatError("node-table checksum mismatch")

    coords = np.zeros((m, 2))
    demand = np.zeros(m, dtype=np.int64)
    service = np.zeros(m)
    tw_start = np.zeros(m)
    tw_end = np.zeros(m)
    prize = np.zeros(m)
    for i, line in enumerate(table_lines):
        ln = table_start + 1 + i
        parts = line.split()
        if len(parts) != 8:
            raise InstanceFormatError(f"expected 8 fields, found {len(parts)}", line=ln)
        try:
            if int(parts[0]) != i:
                raise InstanceFormatError(f"row id {parts[0]} out of order", line=ln)
            coords[i] = (float(parts[1]), float(parts[2]))
            demand[i] = int(parts[3])
            tw_start[i] = float(parts[4])
            tw_end[i] = float(parts[5])
            service[i] = float(parts[6])
            prize[i] = float(parts[7])
        except ValueError as exc:
            raise InstanceFormatError(str(exc), line=ln) from exc

    kwargs = {}
    if problem is Problem.VRPTW:
        kwargs = dict(service=service, tw_start=tw_start, tw_end=tw_end)
    elif problem is Problem.PCVRP:
        kwargs = dict(prize=prize)
    return Instance(problem, coords, demand, int(meta["capacity"]), **kwargs)


@dataclass
class SplitManifest:
    """Paths + seeds for one split; persisted as JSON next to the files."""

    name: str
    seeds: list[int]
    paths: list[str]
    checksums: list[str] = field(default_factory=list)
    params: dict = field(default_factory=dict)


def make_splits(
    base: GenParams,
    out_dir,
    sizes: dict[str, int],
    seed_starts: dict[str, int] | None = None,
) -> dict[str, SplitManifest]:
    """Generate disjoint-seed splits (e.g. train/validation) and manifests.

    Seed ranges are consecutive blocks starting at base.seed unless
    ``seed_starts`` overrides them; overlapping ranges are rejected.
    """
    out_dir = Path(out_dir)
    starts: dict[str, int] = {}
    cursor = base.seed
    for name, count in sizes.items():
        if count < 0:
            raise ConfigError(f"split {name!r} has negative size")
        starts[name] = seed_starts[name] if seed_starts and name in seed_starts else cursor
        cursor = starts[name] + count
    ranges = sorted((starts[name], starts[name] + sizes[name], name) for name in sizes)
    for (lo1, hi1, n1), (lo2, hi2, n2) in zip(ranges, ranges[1:]):
        if hi1 > lo2:
            raise ConfigError(f"seed ranges of splits {n1!r} and {n2!r} overlap")

    manifests: dict[str, SplitManifest] = {}
    for name, count in sizes.items():
        seeds, paths, checksums = [], [], []
        for k in range(count):
            seed = starts[name] + k
            inst = generate(dataclasses.replace(base, seed=seed))
            path = out_dir / name / f"{base.problem.value}-n{base.n}-s{seed}.txt"
            save(inst, path)
            seeds.append(seed)
            paths.append(str(path))
            checksums.append(sha256_hex(path.read_bytes()))
        manifest = SplitManifest(
            name=name,
            seeds=seeds,
            paths=paths,
            checksums=checksums,
            params={
                "problem": base.problem.value,
                "n": base.n,
                "capacity": base.capacity,
                "demand_range": list(base.demand_range),
                "horizon": base.horizon,
                "tw_width_range": list(base.tw_width_range),
                "service_time": base.service_time,
                "prize_range": list(base.prize_range),
            },
        )
        manifest_path = out_dir / f"{name}-manifest.json"
        manifest_path.parent.mkdir(parents=True, exist_ok=True)
        manifest_path.write_text(json.dumps(manifest.__dict__, indent=2) + "\n")
        manifests[name] = manifest
    return manifests


def load_manifest(path) -> SplitManifest:
    data = json.loads(Path(path).read_text())
    return SplitManifest(**data)


def verify_manifest(path) -> SplitManifest:
    """Load a manifest and check every listed file against its checksum."""
    manifest = load_manifest(path)
    for file_path, checksum in zip(manifest.paths, manifest.checksums):
        actual = sha256_hex(Path(file_path).read_bytes())
        if actual != checksum:
            raise InstanceFormatError(f"checksum mismatch for {file_path}")
    return manifest


def eval_seed_for(master_seed: int, index: int) -> int:
    """Per-instance evaluation seed; stable when instances are appended."""
    return derive_seed(master_seed, "instance", index)
