"""Differential Evolution on ``[0, 1]^n`` with pluggable infeasibility handling.

The engine advances a batch of independent runs in lockstep. Populations are
held as ``(runs, p, n)`` arrays so that one generation of every run costs a
handful of numpy calls; a single run is simply a batch of one.

Randomness is split into two streams derived from the run seed: one for the
algorithm's own operators and one for objective values, so operator draws do
not shift with the number of evaluations.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .objective import F0
from .sdis import COTN_SIGMA, SdisKind, repair

DEFAULT_STALL_LIMIT = 10_000


class Mutation(str, enum.Enum):
    RAND_1 = "rand/1"
    RAND_2 = "rand/2"
    BEST_1 = "best/1"
    BEST_2 = "best/2"
    RAND_TO_BEST_2 = "rand-to-best/2"
    CURRENT_TO_BEST_1 = "current-to-best/1"
    CURRENT_TO_RAND_1 = "current-to-rand/1"

    @classmethod
    def parse(cls, name: str) -> "Mutation":
        key = name.strip().lower().replace("curr-to-", "current-to-")
        if key.startswith("de/"):
            key = key[3:]
        for member in cls:
            if member.value == key:
                return member
        raise ValueError(f"unknown mutation {name!r}; expected one of {[m.value for m in cls]}")

    @property
    def n_indices(self) -> int:
        """Number of mutually distinct random members the operator draws."""
        return _N_INDICES[self]

    @property
    def short(self) -> str:
        return self.value.replace("current-to-", "curr-to-")


_N_INDICES = {
    Mutation.RAND_1: 3,
    Mutation.RAND_2: 5,
    Mutation.BEST_1: 2,
    Mutation.BEST_2: 4,
    Mutation.RAND_TO_BEST_2: 5,
    Mutation.CURRENT_TO_BEST_1: 2,
    Mutation.CURRENT_TO_RAND_1: 3,
}


class Crossover(str, enum.Enum):
    BIN = "bin"
    EXP = "exp"
    NONE = "none"

    @classmethod
    def parse(cls, name: str | None) -> "Crossover":
        if name is None:
            return cls.NONE
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ValueError(f"unknown crossover {name!r}; expected bin, exp or none") from None


MIN_POPULATION = 4


@dataclass(frozen=True)
class DEConfig:
    """Full identity of one DE configuration.

    ``Cr`` must be ``None`` exactly when ``crossover`` is ``none``, which in
    turn is the case exactly for ``current-to-rand/1``.
    """

    mutation: Mutation
    crossover: Crossover
    F: float
    Cr: float | None
    p: int
    sdis: SdisKind
    n: int = 30
    budget: int = 300_000
    seed: int = 0
    sigma: float = COTN_SIGMA
    dis_counts_evaluation: bool = False
    stall_limit: int = DEFAULT_STALL_LIMIT

    def __post_init__(self) -> None:
        object.__setattr__(self, "mutation", Mutation(self.mutation))
        object.__setattr__(self, "crossover", Crossover(self.crossover))
        object.__setattr__(self, "sdis", SdisKind(self.sdis))
        no_cr = self.mutation is Mutation.CURRENT_TO_RAND_1
        if no_cr != (self.crossover is Crossover.NONE):
            raise ValueError(
                "crossover must be 'none' for current-to-rand/1 and bin/exp for every other mutation"
            )
        if no_cr and self.Cr is not None:
            raise ValueError("current-to-rand/1 takes no crossover rate (Cr)")
        if not no_cr and (self.Cr is None or not 0.0 <= self.Cr <= 1.0):
            raise ValueError(f"Cr must lie in [0, 1], got {self.Cr}")
        if not self.F > 0:
            raise ValueError(f"F must be positive, got {self.F}")
        need = max(MIN_POPULATION, self.mutation.n_indices)
        if self.p < need:
            raise ValueError(f"population size p={self.p} too small for {self.mutation.value} (need p >= {need})")
        if self.n < 1:
            raise ValueError("dimension n must be >= 1")
        if self.budget < 1:
            raise ValueError("budget must be positive")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    @property
    def excludes_target(self) -> bool:
        """Whether random indices avoid the target; only waived when p leaves no room."""
        return self.p > self.mutation.n_indices

    @property
    def variant(self) -> str:
        name = f"DE/{self.mutation.short}"
        if self.crossover is not Crossover.NONE:
            name += f"/{self.crossover.value}"
        return name

    @property
    def config_id(self) -> str:
        cid = f"{self.variant}-p{self.p}-{self.sdis.value}-F{self.F:.3f}"
        if self.Cr is not None:
            cid += f"-Cr{self.Cr:.3f}"
        return cid

    @property
    def file_stem(self) -> str:
        return self.config_id.replace("/", "_")

    def with_(self, **changes) -> "DEConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class Individual:
    position: np.ndarray
    fitness: float


@dataclass
class Population:
    """``p`` members as a ``(p, n)`` position array plus their fitness values."""

    positions: np.ndarray
    fitness: np.ndarray

    def __len__(self) -> int:
        return self.positions.shape[0]

    def __getitem__(self, i: int) -> Individual:
        return Individual(self.positions[i], float(self.fitness[i]))

    @property
    def best_index(self) -> int:
        return int(np.argmin(self.fitness))


@dataclass
class RunResult:
    final_best: np.ndarray
    final_best_fitness: float
    evaluations_used: int
    seed: int
    generations: int = 0


def spawn_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Return ``(algorithm_rng, objective_rng)`` for a seed."""
    alg, obj = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(alg), np.random.default_rng(obj)


def draw_indices(
    rng: np.random.Generator,
    targets: np.ndarray,
    p: int,
    k: int,
    exclude_target: bool = True,
) -> np.ndarray:
    """Draw ``k`` mutually distinct indices in ``[0, p)`` for each target.

    Returns an int array of shape ``targets.shape + (k,)``. Each index is drawn
    uniformly from the values not yet taken (and not the target, if
    ``exclude_target``) by sampling a rank among the free values and stepping
    over the taken ones in ascending order.
    """
    targets = np.asarray(targets)
    taken = [targets] if exclude_target else []
    if p - len(taken) < k:
        raise ValueError(f"cannot draw {k} distinct indices from a population of {p}")
    out = np.empty(targets.shape + (k,), dtype=np.intp)
    for j in range(k):
        r = rng.integers(0, p - len(taken), size=targets.shape)
        if taken:
            excluded = np.sort(np.stack(taken, axis=-1), axis=-1)
            for c in range(excluded.shape[-1]):
                r += r >= excluded[..., c]
        out[..., j] = r
        taken.append(r)
    return out


def combine(
    mutation: Mutation,
    X: np.ndarray,
    targets: np.ndarray,
    idx: np.ndarray,
    best: np.ndarray,
    F: float,
    K: np.ndarray | float = 0.0,
) -> np.ndarray:
    """Build mutant vectors from already-drawn indices.

    Parameters
    ----------
    X : ndarray, shape (R, p, n)
        Populations of ``R`` runs.
    targets : ndarray, shape (R, t)
        Target index per offspring.
    idx : ndarray, shape (R, t, k)
        Random member indices per offspring.
    best : ndarray, shape (R,)
        Index of the best member of each population.
    F : float
        Scale factor.
    K : float or ndarray broadcastable to (R, t, 1)
        Recombination weight of ``current-to-rand/1``.
    """
    rows = np.arange(X.shape[0])[:, None]

    def pick(j: int) -> np.ndarray:
        return X[rows, idx[..., j]]

    x_i = X[rows, targets]
    x_best = X[np.arange(X.shape[0]), best][:, None, :]
    if mutation is Mutation.RAND_1:
        return pick(0) + F * (pick(1) - pick(2))
    if mutation is Mutation.RAND_2:
        return pick(0) + F * (pick(1) - pick(2)) + F * (pick(3) - pick(4))
    if mutation is Mutation.BEST_1:
        return x_best + F * (pick(0) - pick(1))
    if mutation is Mutation.BEST_2:
        return x_best + F * (pick(0) - pick(1)) + F * (pick(2) - pick(3))
    if mutation is Mutation.CURRENT_TO_BEST_1:
        return x_i + F * (x_best - x_i) + F * (pick(0) - pick(1))
    if mutation is Mutation.RAND_TO_BEST_2:
        x_r1 = pick(0)
        return x_r1 + F * (x_best - x_r1) + F * (pick(1) - pick(2)) + F * (pick(3) - pick(4))
    if mutation is Mutation.CURRENT_TO_RAND_1:
        return x_i + K * (pick(0) - x_i) + F * (pick(1) - pick(2))
    raise ValueError(f"unsupported mutation {mutation}")


def crossover_bin(target, mutant, cr: float, rng: np.random.Generator) -> np.ndarray:
    """Binomial crossover over the last axis; one forced mutant component per vector."""
    target = np.asarray(target, dtype=float)
    mutant = np.asarray(mutant, dtype=float)
    mask = rng.random(mutant.shape) <= cr
    n = mutant.shape[-1]
    jrand = rng.integers(0, n, size=mutant.shape[:-1])
    np.put_along_axis(mask, jrand[..., None], True, axis=-1)
    return np.where(mask, mutant, target)


def exp_segment_mask(shape: tuple[int, ...], cr: float, rng: np.random.Generator) -> np.ndarray:
    """Mask of a cyclic run of mutant components for exponential crossover.

    The run starts at a uniform index and its length ``L`` is one plus the
    number of consecutive ``u <= Cr`` successes, capped at ``n``. That count
    is geometric, so it is drawn directly instead of one uniform at a time.
    """
    n = shape[-1]
    lead = shape[:-1]
    start = rng.integers(0, n, size=lead)
    if cr >= 1.0:
        length = np.full(lead, n)
    else:
        length = np.minimum(rng.geometric(1.0 - cr, size=lead), n)
    offset = (np.arange(n) - start[..., None]) % n
    return offset < length[..., None]


def crossover_exp(target, mutant, cr: float, rng: np.random.Generator) -> np.ndarray:
    """Exponential crossover over the last axis."""
    target = np.asarray(target, dtype=float)
    mutant = np.asarray(mutant, dtype=float)
    return np.where(exp_segment_mask(mutant.shape, cr, rng), mutant, target)


def init_population(
    config: DEConfig,
    rng: np.random.Generator,
    objective_rng: np.random.Generator | None = None,
) -> Population:
    """Sample ``p`` uniform points and evaluate each once on ``f0``."""
    if config.budget < config.p:
        raise ValueError("budget exhausted during initialization")
    objective_rng = rng if objective_rng is None else objective_rng
    positions = rng.random((config.p, config.n))
    fitness = F0(config.n)(positions, objective_rng)
    return Population(positions, fitness)


def mutate(config: DEConfig, pop: Population, target_i: int, rng: np.random.Generator) -> np.ndarray:
    """Mutant vector for one target (not yet repaired, possibly infeasible)."""
    if not 0 <= target_i < len(pop):
        raise IndexError(f"target index {target_i} outside population of {len(pop)}")
    targets = np.array([[target_i]])
    idx = draw_indices(rng, targets, len(pop), config.mutation.n_indices, config.excludes_target)
    K = rng.random((1, 1, 1)) if config.mutation is Mutation.CURRENT_TO_RAND_1 else 0.0
    X = pop.positions[None]
    best = np.array([pop.best_index])
    return combine(config.mutation, X, targets, idx, best, config.F, K)[0, 0]


class BatchDE:
    """Lockstep DE over ``runs`` independent populations sharing one configuration.

    Parameters
    ----------
    config : DEConfig
    runs : int
        Number of independent populations.
    seed : int, optional
        Seeds both random streams; defaults to ``config.seed``.

    Notes
    -----
    Trials are built against the old population and replace their parent,
    ties going to the trial, only after the whole generation has been
    evaluated. Within a generation trials are evaluated in member order, so a
    run whose budget runs out mid-generation leaves the remaining members as
    they were. Under ``dis`` a dismissed trial costs no evaluation; a run that
    goes ``stall_limit`` generations without any evaluation is stopped early.
    """

    def __init__(self, config: DEConfig, runs: int = 1, seed: int | None = None):
        if runs < 1:
            raise ValueError("runs must be >= 1")
        if config.budget < config.p:
            raise ValueError("budget exhausted during initialization")
        self.config = config
        self.runs = runs
        self.seed = config.seed if seed is None else seed
        self.rng, self.objective_rng = spawn_streams(self.seed)
        self.objective = F0(config.n)
        c = config
        self.X = self.rng.random((runs, c.p, c.n))
        self.fitness = self.objective(self.X.reshape(-1, c.n), self.objective_rng).reshape(runs, c.p)
        self.evaluations = np.full(runs, c.p, dtype=np.int64)
        self.generations = np.zeros(runs, dtype=np.int64)
        self._stall = np.zeros(runs, dtype=np.int64)
        self.done = self.evaluations >= c.budget
        self._targets = None

    @property
    def active(self) -> np.ndarray:
        return np.flatnonzero(~self.done)

    def _trials(self, X: np.ndarray, fitness: np.ndarray) -> np.ndarray:
        c = self.config
        R = X.shape[0]
        if self._targets is None or self._targets.shape[0] != R:
            self._targets = np.broadcast_to(np.arange(c.p), (R, c.p))
        idx = draw_indices(self.rng, self._targets, c.p, c.mutation.n_indices, c.excludes_target)
        best = np.argmin(fitness, axis=1)
        if c.mutation is Mutation.CURRENT_TO_RAND_1:
            K = self.rng.random((R, c.p, 1))
            return combine(c.mutation, X, self._targets, idx, best, c.F, K)
        mutant = combine(c.mutation, X, self._targets, idx, best, c.F)
        if c.crossover is Crossover.BIN:
            return crossover_bin(X, mutant, c.Cr, self.rng)
        return crossover_exp(X, mutant, c.Cr, self.rng)

    def step(self) -> np.ndarray:
        """Advance every unfinished run by one generation; return the runs advanced."""
        c = self.config
        act = self.active
        if act.size == 0:
            return act
        whole = act.size == self.runs
        X = self.X if whole else self.X[act]
        fit = self.fitness if whole else self.fitness[act]
        outcome = repair(c.sdis, self._trials(X, fit), self.rng, c.sigma)
        trial, dismissed = outcome.vector, outcome.dismissed

        remaining = c.budget - self.evaluations[act]
        charged = np.ones_like(dismissed) if c.dis_counts_evaluation else ~dismissed
        within = charged & (np.cumsum(charged, axis=1) <= remaining[:, None])
        evaluated = within & ~dismissed
        trial_fit = np.full(fit.shape, np.inf)
        trial_fit[evaluated] = self.objective(trial[evaluated], self.objective_rng)
        win = evaluated & (trial_fit <= fit)

        X[win] = trial[win]
        fit[win] = trial_fit[win]
        if not whole:
            self.X[act] = X
            self.fitness[act] = fit
        spent = within.sum(axis=1)
        self.evaluations[act] += spent
        self.generations[act] += 1
        self._stall[act] = np.where(spent == 0, self._stall[act] + 1, 0)
        self.done[act] = (self.evaluations[act] >= c.budget) | (self._stall[act] >= c.stall_limit)
        return act

    def run(self) -> "BatchDE":
        while not self.done.all():
            self.step()
        return self

    def best_indices(self) -> np.ndarray:
        return np.argmin(self.fitness, axis=1)

    def final_points(self) -> np.ndarray:
        """Best member of each run's current population, shape ``(runs, n)``."""
        return self.X[np.arange(self.runs), self.best_indices()].copy()

    def population(self, run: int = 0) -> Population:
        return Population(self.X[run].copy(), self.fitness[run].copy())

    def results(self) -> list[RunResult]:
        best = self.best_indices()
        return [
            RunResult(
                final_best=self.X[r, best[r]].copy(),
                final_best_fitness=float(self.fitness[r, best[r]]),
                evaluations_used=int(self.evaluations[r]),
                seed=self.seed,
                generations=int(self.generations[r]),
            )
            for r in range(self.runs)
        ]


def run(config: DEConfig, seed: int | None = None) -> RunResult:
    """Execute a single run of ``config`` on ``f0`` until its budget is spent."""
    return BatchDE(config, runs=1, seed=seed).run().results()[0]
