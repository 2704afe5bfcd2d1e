"""MAP-Elites grid archive and the CMA-ME improvement emitter.

The archive discretizes the (workspace, volume) feature plane into a fixed
grid holding at most one elite per cell; candidates enter on strict
objective improvement. The emitter samples from an adaptive multivariate
normal distribution in the normalized genotype box [0, 1]^28, ranks samples
by how much they improved the archive (new cells first, then improvements,
then rejected samples by raw objective) and updates mean, step size and
covariance from that ranking. When a batch contributes nothing, or the
distribution degenerates, the emitter restarts from a random elite.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import EmitterDegenerate
from .features import FeatureDescriptor

WORKSPACE_RANGE = (675.0 * math.sqrt(3.0), 1200.0 * math.sqrt(3.0))


@dataclass(frozen=True)
class Elite:
    """Best known solution of one archive cell."""

    genotype: np.ndarray
    objective: float
    features: FeatureDescriptor
    evaluation_id: int

    def __post_init__(self):
        g = np.asarray(self.genotype, dtype=float)
        object.__setattr__(self, "genotype", g)
        g.setflags(write=False)
        object.__setattr__(self, "objective", float(self.objective))
        if not 0.0 <= self.objective <= 1.0:
            raise ValueError("objective must lie in [0, 1]")


class AddKind(Enum):
    NEW_CELL = "new_cell"
    IMPROVED = "improved"
    REJECTED = "rejected"


@dataclass(frozen=True)
class AddStatus:
    kind: AddKind
    delta: float     # objective for NEW_CELL, improvement for IMPROVED, else 0

    @property
    def improved_archive(self) -> bool:
        return self.kind is not AddKind.REJECTED


@dataclass(frozen=True)
class QDMetrics:
    generation: int
    evaluations: int
    coverage: float
    qd_score: float
    best_objective: float


class ArchiveGrid:
    """2D MAP-Elites grid over (workspace mm^2, volume mm^3)."""

    def __init__(self, dims=(20, 20), workspace_range=WORKSPACE_RANGE,
                 volume_range=(0.0, 1.0)):
        rows, cols = int(dims[0]), int(dims[1])
        if rows < 1 or cols < 1:
            raise ValueError("archive needs at least one cell per axis")
        if not (workspace_range[0] < workspace_range[1]
                and volume_range[0] < volume_range[1]):
            raise ValueError("feature ranges must be increasing")
        self.dims = (rows, cols)
        self.workspace_range = (float(workspace_range[0]), float(workspace_range[1]))
        self.volume_range = (float(volume_range[0]), float(volume_range[1]))
        self.cells: dict[tuple[int, int], Elite] = {}

    @property
    def n_cells(self) -> int:
        return self.dims[0] * self.dims[1]

    def cell_index(self, features: FeatureDescriptor) -> tuple[int, int]:
        """(row, col) = (volume bin, workspace bin); out-of-range values clamp."""
        i = _bin(features.volume, self.volume_range, self.dims[0])
        j = _bin(features.workspace, self.workspace_range, self.dims[1])
        return i, j

    def add(self, elite: Elite) -> AddStatus:
        """Insert under the strict-improvement rule; ties keep the incumbent."""
        key = self.cell_index(elite.features)
        incumbent = self.cells.get(key)
        if incumbent is None:
            self.cells[key] = elite
            return AddStatus(AddKind.NEW_CELL, elite.objective)
        if elite.objective > incumbent.objective:
            self.cells[key] = elite
            return AddStatus(AddKind.IMPROVED, elite.objective - incumbent.objective)
        return AddStatus(AddKind.REJECTED, 0.0)

    def metrics(self, generation: int = 0, evaluations: int = 0) -> QDMetrics:
        objectives = [e.objective for e in self.cells.values()]
        return QDMetrics(
            generation=generation,
            evaluations=evaluations,
            coverage=len(self.cells) / self.n_cells,
            qd_score=float(sum(objectives)),
            best_objective=float(max(objectives)) if objectives else 0.0,
        )

    def elites(self):
        """Elites sorted by cell index for deterministic iteration."""
        return [self.cells[k] for k in sorted(self.cells)]

    def random_elite(self, rng: np.random.Generator) -> Elite | None:
        keys = sorted(self.cells)
        if not keys:
            return None
        return self.cells[keys[rng.integers(len(keys))]]

    def to_csv(self, path) -> None:
        """Stable column order: cell_i, cell_j, workspace, volume, objective, g00..g27."""
        dim = len(next(iter(self.cells.values())).genotype) if self.cells else 28
        header = ["cell_i", "cell_j", "workspace", "volume", "objective"]
        header += [f"g{k:02d}" for k in range(dim)]
        with open(path, "w") as fh:
            fh.write(",".join(header) + "\n")
            for (i, j) in sorted(self.cells):
                e = self.cells[(i, j)]
                row = [str(i), str(j), repr(float(e.features.workspace)),
                       repr(float(e.features.volume)), repr(float(e.objective))]
                row += [repr(float(x)) for x in e.genotype]
                fh.write(",".join(row) + "\n")

    @classmethod
    def from_csv(cls, path, dims=(20, 20), workspace_range=WORKSPACE_RANGE,
                 volume_range=(0.0, 1.0)) -> "ArchiveGrid":
        archive = cls(dims, workspace_range, volume_range)
        with open(path) as fh:
            header = fh.readline().rstrip("\n").split(",")
            gcols = [k for k, name in enumerate(header) if name.startswith("g")]
            for line in fh:
                parts = line.rstrip("\n").split(",")
                i, j = int(parts[0]), int(parts[1])
                elite = Elite(
                    genotype=np.array([float(parts[k]) for k in gcols]),
                    objective=float(parts[4]),
                    features=FeatureDescriptor(workspace=float(parts[2]),
                                               volume=float(parts[3])),
                    evaluation_id=-1)
                archive.cells[(i, j)] = elite
        return archive


def _bin(value: float, rng: tuple[float, float], n: int) -> int:
    lo, hi = rng
    t = (value - lo) / (hi - lo)
    return int(np.clip(math.floor(t * n), 0, n - 1))


def improvement_rank(batch):
    """Order batch entries for the emitter update.

    ``batch`` holds (sample_index, genotype, objective, AddStatus) tuples.
    New cells come first (largest delta first), then improvements (by
    delta), then rejected samples by raw objective; ties break on the lower
    sample index so the ranking is deterministic.
    """
    stratum = {AddKind.NEW_CELL: 0, AddKind.IMPROVED: 1, AddKind.REJECTED: 2}

    def key(entry):
        index, _genotype, objective, status = entry
        primary = status.delta if status.kind is not AddKind.REJECTED else objective
        return (stratum[status.kind], -primary, index)

    return sorted(batch, key=key)


class CMAEmitter:
    """CMA-ES distribution state driving the improvement emitter.

    Uses the standard strategy parameters for a given dimension and
    population size: mu = floor(lambda / 2) parents with log-decreasing
    weights, cumulative step-size adaptation and rank-1 plus rank-mu
    covariance updates. Samples are clamped to the unit box; the clamped
    genotype is what gets evaluated and fed back.
    """

    def __init__(self, dim: int = 28, sigma0: float = 0.2, lam: int = 15,
                 mean=None, rng: np.random.Generator | None = None):
        if lam < 2:
            raise ValueError("population size must be at least 2")
        self.dim = int(dim)
        self.sigma0 = float(sigma0)
        self.lam = int(lam)
        n = self.dim
        self.mu = self.lam // 2
        w = np.log(self.lam / 2 + 0.5) - np.log(np.arange(1, self.mu + 1))
        self.weights = w / w.sum()
        self.mueff = float(self.weights.sum() ** 2 / (self.weights ** 2).sum())
        self.c_sigma = (self.mueff + 2) / (n + self.mueff + 5)
        self.d_sigma = 1 + 2 * max(0.0, math.sqrt((self.mueff - 1) / (n + 1)) - 1) \
            + self.c_sigma
        self.c_c = (4 + self.mueff / n) / (n + 4 + 2 * self.mueff / n)
        self.c_1 = 2 / ((n + 1.3) ** 2 + self.mueff)
        self.c_mu = min(1 - self.c_1,
                        2 * (self.mueff - 2 + 1 / self.mueff) / ((n + 2) ** 2 + self.mueff))
        self.chi_n = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n * n))

        if mean is None:
            mean = (rng.random(n) if rng is not None else np.full(n, 0.5))
        self.mean = np.asarray(mean, dtype=float).copy()
        self.sigma = self.sigma0
        self.cov = np.eye(n)
        self.p_sigma = np.zeros(n)
        self.p_c = np.zeros(n)
        self.generation = 0
        self.restarts = 0
        self._decomposition = None

    def _eigen(self):
        if self._decomposition is None:
            vals, vecs = np.linalg.eigh(self.cov)
            if not np.all(np.isfinite(vals)) or vals.min() <= 0.0:
                raise EmitterDegenerate(
                    f"covariance not positive definite (min eigenvalue {vals.min():.3e})")
            self._decomposition = (vals, vecs)
        return self._decomposition

    @property
    def condition_number(self) -> float:
        vals, _ = self._eigen()
        return float(vals.max() / vals.min())

    def ask(self, lam: int | None = None, rng: np.random.Generator | None = None):
        """Sample genotypes, clamped componentwise to [0, 1]."""
        lam = self.lam if lam is None else int(lam)
        if lam < 1:
            raise ValueError("need at least one sample")
        rng = np.random.default_rng() if rng is None else rng
        vals, vecs = self._eigen()
        z = rng.standard_normal((lam, self.dim))
        y = (vecs * np.sqrt(vals)) @ z.T
        samples = self.mean[None, :] + self.sigma * y.T
        return np.clip(samples, 0.0, 1.0)

    def tell(self, ranked_genotypes) -> None:
        """Update mean, paths, step size and covariance from ranked samples.

        ``ranked_genotypes`` is the full population ordered best first (for
        CMA-ME, by :func:`improvement_rank`).
        """
        xs = np.asarray(ranked_genotypes, dtype=float)
        if xs.shape != (self.lam, self.dim):
            raise ValueError(f"expected {self.lam} ranked genotypes of dim {self.dim}")
        n = self.dim
        vals, vecs = self._eigen()
        inv_sqrt = (vecs / np.sqrt(vals)) @ vecs.T

        old_mean = self.mean
        parents = xs[: self.mu]
        self.mean = self.weights @ parents
        y_w = (self.mean - old_mean) / self.sigma

        self.p_sigma = ((1 - self.c_sigma) * self.p_sigma
                        + math.sqrt(self.c_sigma * (2 - self.c_sigma) * self.mueff)
                        * (inv_sqrt @ y_w))
        ps_norm = float(np.linalg.norm(self.p_sigma))
        expected = self.chi_n
        denom = math.sqrt(1 - (1 - self.c_sigma) ** (2 * (self.generation + 1)))
        h_sigma = 1.0 if ps_norm / denom / expected < 1.4 + 2 / (n + 1) else 0.0
        self.p_c = ((1 - self.c_c) * self.p_c
                    + h_sigma * math.sqrt(self.c_c * (2 - self.c_c) * self.mueff) * y_w)

        ys = (parents - old_mean) / self.sigma
        rank_mu = np.einsum("k,ki,kj->ij", self.weights, ys, ys)
        delta_h = (1 - h_sigma) * self.c_c * (2 - self.c_c)
        self.cov = ((1 - self.c_1 - self.c_mu) * self.cov
                    + self.c_1 * (np.outer(self.p_c, self.p_c) + delta_h * self.cov)
                    + self.c_mu * rank_mu)
        self.cov = 0.5 * (self.cov + self.cov.T)     # re-symmetrize every generation

        self.sigma *= math.exp((self.c_sigma / self.d_sigma) * (ps_norm / expected - 1))
        self.generation += 1
        if not (np.all(np.isfinite(self.cov)) and np.isfinite(self.sigma)
                and np.all(np.isfinite(self.mean))):
            raise EmitterDegenerate("non-finite emitter state")
        # degenerate parent sets (clamped populations) can push eigenvalues
        # numerically negative; floor them well above reconstruction round-off
        vals, vecs = np.linalg.eigh(self.cov)
        floor = max(float(vals.max()) * 1e-12, 1e-30)
        if vals.min() < floor:
            vals = np.maximum(vals, floor)
            self.cov = (vecs * vals) @ vecs.T
            self.cov = 0.5 * (self.cov + self.cov.T)
        self._decomposition = (vals, vecs)

    def restart(self, archive: ArchiveGrid | None, rng: np.random.Generator) -> None:
        """Reset the distribution at a random elite (or a random point)."""
        elite = archive.random_elite(rng) if archive is not None else None
        if elite is None:
            self.mean = rng.random(self.dim)
        else:
            self.mean = elite.genotype.copy()
        self.sigma = self.sigma0
        self.cov = np.eye(self.dim)
        self.p_sigma = np.zeros(self.dim)
        self.p_c = np.zeros(self.dim)
        self.restarts += 1
        self._decomposition = None

    def maybe_restart(self, archive: ArchiveGrid, batch_statuses,
                      rng: np.random.Generator) -> bool:
        """Restart when the batch stalled or the distribution degenerated."""
        stalled = not any(s.improved_archive for s in batch_statuses)
        degenerate = self.sigma < 1e-12
        if not degenerate:
            try:
                degenerate = self.condition_number > 1e14
            except EmitterDegenerate:
                degenerate = True
        if stalled or degenerate:
            self.restart(archive, rng)
            return True
        return False


def _default_fallback_features(genotype) -> FeatureDescriptor:
    from .design import decode
    from .features import features_of

    return features_of(decode(np.clip(genotype, 0.0, 1.0)))


def run_generation(emitter: CMAEmitter, archive: ArchiveGrid, evaluator,
                   lam: int | None = None, rng: np.random.Generator | None = None,
                   evaluations_so_far: int = 0, evaluation_log: list | None = None,
                   parallel: int = 1, fallback_features=_default_fallback_features) -> QDMetrics:
    """One ask-evaluate-add-rank-tell-restart cycle; returns a metrics snapshot.

    ``evaluator(genotype) -> (objective, FeatureDescriptor)``; an evaluator
    error scores that sample 0.0 with features recomputed from geometry via
    ``fallback_features``, and never aborts the generation. Results are
    applied in sample-index order, so any evaluation parallelism cannot
    change the archive state.
    """
    lam = emitter.lam if lam is None else int(lam)
    rng = np.random.default_rng() if rng is None else rng
    samples = emitter.ask(lam, rng)

    def run_one(genotype):
        try:
            objective, feats = evaluator(genotype)
            return float(objective), feats
        except Exception:
            return 0.0, fallback_features(genotype)

    if parallel > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(run_one, samples))
    else:
        results = [run_one(g) for g in samples]

    batch = []
    statuses = []
    for k, (genotype, (objective, feats)) in enumerate(zip(samples, results)):
        elite = Elite(genotype=genotype.copy(), objective=objective,
                      features=feats, evaluation_id=evaluations_so_far + k)
        status = archive.add(elite)
        statuses.append(status)
        batch.append((k, genotype, objective, status))
        if evaluation_log is not None:
            evaluation_log.append((evaluations_so_far + k, genotype.copy(),
                                   objective, feats))

    ranked = improvement_rank(batch)
    emitter.tell([entry[1] for entry in ranked])
    emitter.maybe_restart(archive, statuses, rng)
    return archive.metrics(generation=emitter.generation,
                           evaluations=evaluations_so_far + lam)
