"""Storage-system data model: codes, service laws, files, cluster, access matrix.

Also holds the access-set sampler, which draws k distinct servers so that
each server's inclusion frequency equals its access probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DomainError, ValidationError

PROB_TOL = 1e-9


@dataclass(frozen=True)
class CodeSpec:
    """(n, k) MDS code: any k of the n coded chunks rebuild the file."""

    n: int
    k: int

    def __post_init__(self):
        if int(self.n) != self.n or int(self.k) != self.k:
            raise ValidationError([f"code ({self.n},{self.k}): n and k must be integers"])
        if self.k < 1 or self.n < 1:
            raise ValidationError([f"code ({self.n},{self.k}): n and k must be positive"])
        if self.k > self.n:
            raise ValidationError([f"code ({self.n},{self.k}): k > n"])


# ---------------------------------------------------------------- service laws


class ServiceModel:
    """Base class for per-chunk service-time laws (seconds)."""

    family = "abstract"

    def mean(self) -> float:
        raise NotImplementedError

    def second_moment(self) -> float:
        raise NotImplementedError

    def third_moment(self) -> float:
        raise NotImplementedError

    def variance(self) -> float:
        m = self.mean()
        return max(self.second_moment() - m * m, 0.0)

    @property
    def mgf_bound(self) -> float:
        """Supremum of the open interval of t where the MGF is finite."""
        raise NotImplementedError

    def _check_t(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t >= self.mgf_bound) and not (self.mgf_bound == 0.0 and np.all(t <= 0.0)):
            raise DomainError(f"{self.family} MGF undefined at t={t} (domain t < {self.mgf_bound})")
        return t

    def mgf(self, t):
        """E[exp(tS)]."""
        return 1.0 + self.mgf_minus_one(t)

    def mgf_minus_one(self, t):
        """E[exp(tS)] - 1, accurate for small t."""
        raise NotImplementedError

    def mgf_derivative(self, t):
        """d/dt E[exp(tS)]."""
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size=None):
        raise NotImplementedError

    def params(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Exponential(ServiceModel):
    rate: float
    family = "exponential"

    def __post_init__(self):
        if not self.rate > 0:
            raise ValidationError([f"exponential rate must be > 0, got {self.rate}"])

    def mean(self):
        return 1.0 / self.rate

    def second_moment(self):
        return 2.0 / self.rate**2

    def third_moment(self):
        return 6.0 / self.rate**3

    @property
    def mgf_bound(self):
        return float(self.rate)

    def mgf_minus_one(self, t):
        t = self._check_t(t)
        return t / (self.rate - t)

    def mgf_derivative(self, t):
        t = self._check_t(t)
        return self.rate / (self.rate - t) ** 2

    def sample(self, rng, size=None):
        return rng.exponential(1.0 / self.rate, size)

    def params(self):
        return {"rate": self.rate}


@dataclass(frozen=True)
class ShiftedExponential(ServiceModel):
    """Sexp(shift, rate): a constant shift plus an exponential tail."""

    shift: float
    rate: float
    family = "shifted_exponential"

    def __post_init__(self):
        problems = []
        if not self.rate > 0:
            problems.append(f"shifted-exponential rate must be > 0, got {self.rate}")
        if not self.shift >= 0:
            problems.append(f"shifted-exponential shift must be >= 0, got {self.shift}")
        if problems:
            raise ValidationError(problems)

    def mean(self):
        return self.shift + 1.0 / self.rate

    def second_moment(self):
        return 1.0 / self.rate**2 + self.mean() ** 2

    def third_moment(self):
        b, a = self.shift, self.rate
        return b**3 + 3 * b * b / a + 6 * b / a**2 + 6 / a**3

    @property
    def mgf_bound(self):
        return float(self.rate)

    def mgf_minus_one(self, t):
        t = self._check_t(t)
        a = self.rate
        return np.expm1(self.shift * t) * a / (a - t) + t / (a - t)

    def mgf_derivative(self, t):
        t = self._check_t(t)
        a, b = self.rate, self.shift
        return np.exp(b * t) * a * (b * (a - t) + 1.0) / (a - t) ** 2

    def sample(self, rng, size=None):
        return self.shift + rng.exponential(1.0 / self.rate, size)

    def params(self):
        return {"shift": self.shift, "rate": self.rate}


@dataclass(frozen=True)
class Deterministic(ServiceModel):
    value: float
    family = "deterministic"

    def __post_init__(self):
        if not self.value > 0:
            raise ValidationError([f"deterministic value must be > 0, got {self.value}"])

    def mean(self):
        return float(self.value)

    def second_moment(self):
        return float(self.value) ** 2

    def third_moment(self):
        return float(self.value) ** 3

    @property
    def mgf_bound(self):
        return math.inf

    def mgf_minus_one(self, t):
        t = np.asarray(t, dtype=float)
        return np.expm1(self.value * t)

    def mgf_derivative(self, t):
        t = np.asarray(t, dtype=float)
        return self.value * np.exp(self.value * t)

    def sample(self, rng, size=None):
        if size is None:
            return float(self.value)
        return np.full(size, float(self.value))

    def params(self):
        return {"value": self.value}


@dataclass(frozen=True)
class ParetoScaledExponential(ServiceModel):
    """Service time X*C with X ~ Exp(rate) and chunk size C ~ Pareto(shape, scale).

    The MGF is infinite for every t > 0, so the Chernoff-type bounds do not
    apply; the moments are finite for shape > 2 (third moment for shape > 3).
    """

    shape: float
    scale: float
    rate: float
    family = "pareto_exponential"

    def __post_init__(self):
        problems = []
        if not self.shape > 2:
            problems.append(f"Pareto shape must be > 2, got {self.shape}")
        if not self.scale > 0:
            problems.append(f"Pareto scale must be > 0, got {self.scale}")
        if not self.rate > 0:
            problems.append(f"per-unit rate must be > 0, got {self.rate}")
        if problems:
            raise ValidationError(problems)

    def mean(self):
        a = self.shape
        return a * self.scale / ((a - 1.0) * self.rate)

    def second_moment(self):
        a = self.shape
        return 2.0 * a * self.scale**2 / ((a - 2.0) * self.rate**2)

    def third_moment(self):
        a = self.shape
        if a <= 3:
            return math.inf
        return 6.0 * a * self.scale**3 / ((a - 3.0) * self.rate**3)

    @property
    def mgf_bound(self):
        return 0.0

    def mgf_minus_one(self, t):
        t = self._check_t(t)
        if np.all(t == 0):
            return np.zeros_like(t)
        raise DomainError("Pareto-scaled MGF is only evaluated at t = 0")

    def mgf_derivative(self, t):
        t = self._check_t(t)
        if np.all(t == 0):
            return np.full_like(t, self.mean())
        raise DomainError("Pareto-scaled MGF is only evaluated at t = 0")

    def sample(self, rng, size=None):
        x = rng.exponential(1.0 / self.rate, size)
        c = self.scale * (1.0 - rng.random(size)) ** (-1.0 / self.shape)
        return x * c

    def params(self):
        return {"shape": self.shape, "scale": self.scale, "rate": self.rate}


SERVICE_FAMILIES = {
    "exponential": Exponential,
    "shifted_exponential": ShiftedExponential,
    "deterministic": Deterministic,
    "pareto_exponential": ParetoScaledExponential,
}


def make_service(family: str, params: dict) -> ServiceModel:
    """Build a service model from a family name and keyword parameters."""
    try:
        cls = SERVICE_FAMILIES[family]
    except KeyError:
        raise ValidationError([f"unknown service family {family!r}; expected one of {sorted(SERVICE_FAMILIES)}"])
    try:
        return cls(**params)
    except TypeError as exc:
        raise ValidationError([f"bad parameters for {family}: {exc}"])


class ServiceMoments(NamedTuple):
    mean: float
    variance: float
    second_moment: float
    mgf: object
    mgf_bound: float


def service_moments(model: ServiceModel) -> ServiceMoments:
    """Mean, variance, second moment, MGF evaluator and MGF domain bound."""
    return ServiceMoments(model.mean(), model.variance(), model.second_moment(), model.mgf, model.mgf_bound)


# ---------------------------------------------------------------- files and cluster


@dataclass(frozen=True)
class FileSpec:
    id: str
    arrival_rate: float
    code: CodeSpec
    placement: tuple
    segments: int = 1
    segment_length: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "placement", tuple(self.placement))


@dataclass(frozen=True)
class Server:
    id: str
    service: ServiceModel


@dataclass(frozen=True)
class Cluster:
    servers: tuple

    def __post_init__(self):
        object.__setattr__(self, "servers", tuple(self.servers))

    @property
    def ids(self):
        return [s.id for s in self.servers]

    @property
    def m(self):
        return len(self.servers)

    def index(self, server_id) -> int:
        for j, s in enumerate(self.servers):
            if s.id == server_id:
                return j
        raise KeyError(server_id)

    def means(self) -> np.ndarray:
        return np.array([s.service.mean() for s in self.servers])


@dataclass(frozen=True)
class Workload:
    """Validated set of files on a cluster, with array views for numerics."""

    files: tuple
    cluster: Cluster
    lam: np.ndarray = field(repr=False, compare=False, default=None)
    k: np.ndarray = field(repr=False, compare=False, default=None)
    n: np.ndarray = field(repr=False, compare=False, default=None)
    segments: np.ndarray = field(repr=False, compare=False, default=None)
    support: np.ndarray = field(repr=False, compare=False, default=None)

    @property
    def r(self):
        return len(self.files)

    @property
    def m(self):
        return self.cluster.m

    @property
    def file_ids(self):
        return [f.id for f in self.files]


def validate_workload(files: Sequence[FileSpec], cluster: Cluster) -> Workload:
    """Check every invariant; return a Workload or raise ValidationError listing all violations."""
    problems = []
    if len(cluster.servers) == 0:
        problems.append("cluster: at least one server required")
    sids = [s.id for s in cluster.servers]
    seen = set()
    for sid in sids:
        if sid in seen:
            problems.append(f"server {sid}: duplicate id")
        seen.add(sid)
    fseen = set()
    for f in files:
        if f.id in fseen:
            problems.append(f"file {f.id}: duplicate id")
        fseen.add(f.id)
        if f.code.k > f.code.n:
            problems.append(f"file {f.id}: k > n")
        if len(f.placement) != f.code.n:
            problems.append(f"file {f.id}: placement size != n ({len(f.placement)} vs {f.code.n})")
        if len(set(f.placement)) != len(f.placement):
            problems.append(f"file {f.id}: placement repeats a server")
        for sid in f.placement:
            if sid not in seen:
                problems.append(f"file {f.id}: unknown server id {sid}")
        if not (f.arrival_rate >= 0 and math.isfinite(f.arrival_rate)):
            problems.append(f"file {f.id}: arrival rate must be finite and >= 0")
        if int(f.segments) != f.segments or f.segments < 1:
            problems.append(f"file {f.id}: segments must be an integer >= 1")
        if f.segment_length < 0:
            problems.append(f"file {f.id}: segment length must be >= 0")
    if problems:
        raise ValidationError(problems)
    index = {sid: j for j, sid in enumerate(sids)}
    support = np.zeros((len(files), len(sids)), dtype=bool)
    for i, f in enumerate(files):
        for sid in f.placement:
            support[i, index[sid]] = True
    return Workload(
        files=tuple(files),
        cluster=cluster,
        lam=np.array([f.arrival_rate for f in files], dtype=float),
        k=np.array([f.code.k for f in files], dtype=int),
        n=np.array([f.code.n for f in files], dtype=int),
        segments=np.array([f.segments for f in files], dtype=int),
        support=support,
    )


# ---------------------------------------------------------------- access matrix


@dataclass(frozen=True)
class AccessMatrix:
    """Access probabilities pi[i, j] for file i (row) and server j (column)."""

    pi: np.ndarray
    file_ids: tuple
    server_ids: tuple

    def __post_init__(self):
        object.__setattr__(self, "pi", np.array(self.pi, dtype=float))
        object.__setattr__(self, "file_ids", tuple(self.file_ids))
        object.__setattr__(self, "server_ids", tuple(self.server_ids))

    @classmethod
    def for_workload(cls, workload: Workload, pi) -> "AccessMatrix":
        am = cls(pi, workload.file_ids, workload.cluster.ids)
        am.check(workload)
        return am

    def check(self, workload: Workload, tol: float = PROB_TOL):
        """Raise ValidationError unless rows sum to k, entries lie in [0,1] and respect placement."""
        pi = self.pi
        problems = []
        if pi.shape != (workload.r, workload.m):
            raise ValidationError([f"access matrix shape {pi.shape} != ({workload.r}, {workload.m})"])
        for i, f in enumerate(workload.files):
            row = pi[i]
            if np.any(row < -tol) or np.any(row > 1 + tol):
                problems.append(f"file {f.id}: probabilities outside [0,1]")
            if abs(row.sum() - f.code.k) > tol:
                problems.append(f"file {f.id}: row sum {row.sum():.12g} != k={f.code.k}")
            if np.any(np.abs(row[~workload.support[i]]) > tol):
                problems.append(f"file {f.id}: positive probability off placement")
        if problems:
            raise ValidationError(problems)

    def get(self, file_id, server_id) -> float:
        return float(self.pi[self.file_ids.index(file_id), self.server_ids.index(server_id)])


def _as_array(pi) -> np.ndarray:
    return pi.pi if isinstance(pi, AccessMatrix) else np.asarray(pi, dtype=float)


def arrival_vector(workload: Workload, pi) -> np.ndarray:
    """Per-server aggregate chunk arrival rates as an array in cluster order."""
    return workload.lam @ _as_array(pi)


def effective_arrival_rates(workload: Workload, pi) -> dict:
    """Map server id to Lambda_j = sum_i lambda_i pi[i, j]."""
    lam = arrival_vector(workload, pi)
    return {sid: float(v) for sid, v in zip(workload.cluster.ids, lam)}


def uniform_access(workload: Workload) -> np.ndarray:
    """pi[i, j] = k_i / n_i on the placement of file i."""
    return workload.support * (workload.k / workload.n)[:, None]


# ---------------------------------------------------------------- access-set sampler


def _check_row(row: np.ndarray, k: int):
    if np.any(row < -PROB_TOL) or np.any(row > 1 + PROB_TOL):
        raise ValidationError(["access row has entries outside [0,1]"])
    if abs(row.sum() - k) > PROB_TOL:
        raise ValidationError([f"access row sums to {row.sum():.12g}, expected k={k}"])


def sample_access_set(pi_row, k: int, rng: np.random.Generator, server_ids=None) -> frozenset:
    """Draw k distinct servers with inclusion probabilities pi_row.

    Systematic sampling over a random permutation: lay the probabilities end
    to end in random order and pick the servers whose intervals contain the
    points u, u+1, ..., u+k-1 for a single uniform u.
    """
    row = np.clip(np.asarray(pi_row, dtype=float), 0.0, 1.0)
    _check_row(np.asarray(pi_row, dtype=float), k)
    order = rng.permutation(len(row))
    cum = np.cumsum(row[order])
    cum[-1] = k
    u = rng.random()
    hits = np.minimum(np.floor(cum - u) + 1, k)
    prev = np.concatenate(([0.0], hits[:-1]))
    chosen = order[(hits - prev) >= 1]
    if server_ids is None:
        return frozenset(int(j) for j in chosen)
    return frozenset(server_ids[j] for j in chosen)


def sample_access_sets(pi_row, k: int, rng: np.random.Generator, count: int) -> np.ndarray:
    """Vectorized sampler: returns a (count, k) integer array of server indices."""
    row = np.clip(np.asarray(pi_row, dtype=float), 0.0, 1.0)
    _check_row(np.asarray(pi_row, dtype=float), k)
    m = len(row)
    perms = rng.permuted(np.tile(np.arange(m), (count, 1)), axis=1)
    cum = np.cumsum(row[perms], axis=1)
    cum[:, -1] = k
    u = rng.random((count, 1))
    hits = np.minimum(np.floor(cum - u) + 1, k)
    prev = np.concatenate((np.zeros((count, 1)), hits[:, :-1]), axis=1)
    mask = (hits - prev) >= 1
    out = perms[mask].reshape(count, k)
    return np.sort(out, axis=1)
