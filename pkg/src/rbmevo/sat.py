"""MAX-k-SAT and parity fitness landscapes.

Genomes are 1-D binary vectors (numpy uint8 arrays); bit i gives the truth
value of variable i. A CNF instance maps a genome to the fraction of clauses
it satisfies, an even-parity landscape maps it to 0/1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np

__all__ = [
    "Literal",
    "CnfInstance",
    "DimacsParseError",
    "FitnessFn",
    "MaxSatFitness",
    "ParityFitness",
    "eval_maxsat",
    "eval_parity",
    "gen_uniform_ksat",
    "parse_dimacs",
    "emit_dimacs",
]


@dataclass(frozen=True)
class Literal:
    """One occurrence of a variable (0-based index) inside a clause."""

    variable_index: int
    negated: bool = False

    def to_dimacs(self) -> int:
        v = self.variable_index + 1
        return -v if self.negated else v


class DimacsParseError(ValueError):
    """Malformed DIMACS CNF input; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class CnfInstance:
    """An immutable CNF formula over ``num_variables`` Boolean variables.

    Literals inside a clause are stored sorted by variable index; clause
    order is preserved. Within a clause all variables must be distinct, and
    no two clauses may be equal.
    """

    def __init__(self, num_variables: int, clauses: Iterable[Sequence[Literal]]):
        if num_variables < 1:
            raise ValueError(f"num_variables must be >= 1, got {num_variables}")
        canon = []
        seen = set()
        for clause in clauses:
            lits = tuple(sorted(clause, key=lambda l: l.variable_index))
            for lit in lits:
                if not 0 <= lit.variable_index < num_variables:
                    raise ValueError(f"variable index {lit.variable_index} out of range")
            if len({l.variable_index for l in lits}) != len(lits):
                raise ValueError("duplicate variable inside a clause")
            if lits in seen:
                raise ValueError("duplicate clause")
            seen.add(lits)
            canon.append(lits)
        self.num_variables = num_variables
        self.clauses: tuple[tuple[Literal, ...], ...] = tuple(canon)
        self._var_idx: np.ndarray | None = None
        self._neg: np.ndarray | None = None

    @property
    def num_clauses(self) -> int:
        return len(self.clauses)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CnfInstance):
            return NotImplemented
        return self.num_variables == other.num_variables and self.clauses == other.clauses

    def __hash__(self) -> int:
        return hash((self.num_variables, self.clauses))

    def __repr__(self) -> str:
        return f"CnfInstance(n={self.num_variables}, m={self.num_clauses})"

    def _packed(self) -> tuple[np.ndarray, np.ndarray]:
        # Clauses padded to uniform width by repeating their first literal,
        # which leaves any() over the literal axis unchanged.
        if self._var_idx is None:
            if self.num_clauses == 0:
                raise ValueError("instance has no clauses to evaluate")
            kmax = max(len(c) for c in self.clauses)
            if kmax == 0:
                raise ValueError("instance contains only empty clauses")
            var_idx = np.zeros((self.num_clauses, kmax), dtype=np.int32)
            neg = np.zeros((self.num_clauses, kmax), dtype=np.uint8)
            for j, clause in enumerate(self.clauses):
                if not clause:
                    raise ValueError("cannot evaluate an empty clause")
                for l, lit in enumerate(clause):
                    var_idx[j, l] = lit.variable_index
                    neg[j, l] = lit.negated
                var_idx[j, len(clause):] = clause[0].variable_index
                neg[j, len(clause):] = clause[0].negated
            self._var_idx, self._neg = var_idx, neg
        return self._var_idx, self._neg

    def satisfied_counts(self, genomes: np.ndarray) -> np.ndarray:
        """Number of satisfied clauses for each row of a (N, n) genome matrix."""
        P = np.atleast_2d(np.asarray(genomes, dtype=np.uint8))
        if P.shape[1] != self.num_variables:
            raise ValueError(
                f"genome length {P.shape[1]} != num_variables {self.num_variables}"
            )
        var_idx, neg = self._packed()
        counts = np.empty(P.shape[0], dtype=np.int64)
        # Block over rows so the (rows, m, k) literal table stays small.
        block = max(1, 8_000_000 // var_idx.size)
        for lo in range(0, P.shape[0], block):
            sub = P[lo:lo + block]
            lit_true = sub[:, var_idx] != neg
            counts[lo:lo + block] = lit_true.any(axis=2).sum(axis=1)
        return counts


class FitnessFn:
    """Fitness function over binary genomes of length ``n``, valued in [0, 1]."""

    n: int

    def many(self, genomes: np.ndarray) -> np.ndarray:
        """Vectorized evaluation of a (N, n) genome matrix."""
        raise NotImplementedError

    def __call__(self, genome: np.ndarray) -> float:
        g = np.asarray(genome)
        if g.ndim != 1:
            raise ValueError("genome must be a 1-D binary vector")
        return float(self.many(g[None, :])[0])


class MaxSatFitness(FitnessFn):
    """Fraction of clauses of a CNF instance satisfied by a genome."""

    def __init__(self, instance: CnfInstance):
        if instance.num_clauses == 0:
            raise ValueError("cannot build a fitness function from an empty formula")
        self.instance = instance
        self.n = instance.num_variables

    def many(self, genomes: np.ndarray) -> np.ndarray:
        counts = self.instance.satisfied_counts(genomes)
        return counts / self.instance.num_clauses


class ParityFitness(FitnessFn):
    """1.0 when the genome has an even number of ones, else 0.0."""

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("parity landscape needs n >= 1")
        self.n = n

    def many(self, genomes: np.ndarray) -> np.ndarray:
        P = np.atleast_2d(np.asarray(genomes, dtype=np.uint8))
        if P.shape[1] != self.n:
            raise ValueError(f"genome length {P.shape[1]} != n {self.n}")
        return ((P.sum(axis=1) & 1) == 0).astype(np.float64)


def eval_maxsat(instance: CnfInstance, genome: np.ndarray) -> float:
    """Fraction of clauses satisfied by one genome."""
    g = np.asarray(genome)
    if g.ndim != 1 or g.shape[0] != instance.num_variables:
        raise ValueError(
            f"genome length {g.shape} does not match instance with n={instance.num_variables}"
        )
    return float(instance.satisfied_counts(g)[0] / instance.num_clauses)


def eval_parity(genome: np.ndarray) -> float:
    """1.0 for an even number of one-bits, else 0.0."""
    g = np.asarray(genome, dtype=np.uint8)
    if g.ndim != 1 or g.shape[0] < 1:
        raise ValueError("genome must be a nonempty 1-D binary vector")
    return float((int(g.sum()) & 1) == 0)


def gen_uniform_ksat(
    n: int, k: int, ratio: float, rng: np.random.Generator
) -> CnfInstance:
    """Uniform random MAX-k-SAT instance with ceil(n * ratio) distinct clauses.

    Each clause draws k distinct variables uniformly and negates each literal
    with probability 1/2; duplicate clauses are rejected and resampled whole.
    """
    if not 1 <= k <= n:
        raise ValueError(f"need n >= k >= 1, got n={n}, k={k}")
    if ratio <= 0:
        raise ValueError(f"ratio must be positive, got {ratio}")
    m = math.ceil(n * ratio)
    possible = math.comb(n, k) * 2**k
    if m > possible:
        raise ValueError(
            f"cannot generate {m} distinct clauses: only {possible} exist for n={n}, k={k}"
        )
    seen: set[tuple] = set()
    clauses = []
    while len(clauses) < m:
        vars_ = np.sort(rng.choice(n, size=k, replace=False))
        negs = rng.random(k) < 0.5
        key = (tuple(int(v) for v in vars_), tuple(bool(s) for s in negs))
        if key in seen:
            continue
        seen.add(key)
        clauses.append(
            tuple(Literal(int(v), bool(s)) for v, s in zip(vars_, negs))
        )
    return CnfInstance(n, clauses)


def parse_dimacs(source: str | IO[str]) -> CnfInstance:
    """Parse DIMACS CNF text ('c' comments, 'p cnf n m' header, 0-terminated clauses)."""
    text = source.read() if hasattr(source, "read") else source
    num_vars: int | None = None
    num_clauses: int | None = None
    clauses: list[list[Literal]] = []
    current: list[Literal] = []
    current_vars: set[int] = set()
    lineno = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("p"):
            if num_vars is not None:
                raise DimacsParseError("duplicate problem line", lineno)
            parts = line.split()
            if len(parts) != 4 or parts[0] != "p" or parts[1] != "cnf":
                raise DimacsParseError(f"malformed problem line {line!r}", lineno)
            try:
                num_vars, num_clauses = int(parts[2]), int(parts[3])
            except ValueError:
                raise DimacsParseError(f"malformed problem line {line!r}", lineno) from None
            if num_vars < 1 or num_clauses < 0:
                raise DimacsParseError("problem line declares invalid sizes", lineno)
            continue
        if num_vars is None:
            raise DimacsParseError("clause data before problem line", lineno)
        for tok in line.split():
            try:
                val = int(tok)
            except ValueError:
                raise DimacsParseError(f"invalid token {tok!r}", lineno) from None
            if val == 0:
                clauses.append(current)
                current, current_vars = [], set()
                continue
            idx = abs(val) - 1
            if idx >= num_vars:
                raise DimacsParseError(f"variable {abs(val)} out of range 1..{num_vars}", lineno)
            if idx in current_vars:
                raise DimacsParseError(f"duplicate variable {abs(val)} in clause", lineno)
            current_vars.add(idx)
            current.append(Literal(idx, negated=val < 0))
    if num_vars is None:
        raise DimacsParseError("missing problem line", lineno or None)
    if current:
        raise DimacsParseError("unterminated clause at end of input", lineno)
    if len(clauses) != num_clauses:
        raise DimacsParseError(
            f"problem line declares {num_clauses} clauses but {len(clauses)} found", lineno
        )
    try:
        return CnfInstance(num_vars, clauses)
    except ValueError as exc:
        raise DimacsParseError(str(exc)) from exc


def emit_dimacs(instance: CnfInstance, comments: Sequence[str] = ()) -> str:
    """Serialize an instance; parse_dimacs(emit_dimacs(x)) == x."""
    lines = [f"c {c}" for c in comments]
    lines.append(f"p cnf {instance.num_variables} {instance.num_clauses}")
    for clause in instance.clauses:
        lines.append(" ".join(str(l.to_dimacs()) for l in clause) + " 0")
    return "\n".join(lines) + "\n"
