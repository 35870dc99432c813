"""Exact Gaussian matrix moments by pair-partition enumeration.

For ``xi ~ N(0, C)`` and ``X = xi xi^T``, a *word* is an ordered product of
letters ``X`` and ``C`` (non-commuting), written as a string such as
``"XCX"``.  Its expectation is computed two independent ways:

* :func:`symbolic_word_moment` -- each Isserlis pairing is turned into a
  graph on the slot boundaries ``0..p``.  Letter ``j`` (1-based) spans
  boundaries ``(j-1, j)``: a ``C`` letter is the fixed edge ``(j-1, j)``, an
  ``X`` letter puts two Gaussian endpoints on boundaries ``j-1`` and ``j``
  which the pairing joins.  Every inner boundary has degree two, the outer
  ones degree one, so the edges split into one chain ``0 -> p`` of length
  ``c`` and disjoint loops of lengths ``l_j``; the pairing contributes
  ``C^c prod_j tr(C^l_j)``.
* :func:`numeric_word_moment` -- brute-force entrywise Isserlis sum over all
  index tuples, no graph reasoning.

Both routes share only :func:`iter_pairings`.
"""

from __future__ import annotations

import enum
import itertools
import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, NamedTuple

import numpy as np

from .errors import DomainError, InvalidInputError, SizeLimitError
from .spectra import CovarianceMatrix

MAX_ENDPOINTS = 16
MAX_WORD_LENGTH = 8
NUMERIC_WORK_LIMIT = 10**7
PSD_RTOL = 1e-8


def double_factorial(n: int) -> int:
    """``n!!`` with the convention ``(-1)!! = 1``."""
    if n < -1:
        raise DomainError(f"double factorial undefined for {n}")
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


# -- pairings ---------------------------------------------------------------


def _matchings(points: list[int]) -> Iterator[tuple[tuple[int, int], ...]]:
    if not points:
        yield ()
        return
    first, rest = points[0], points[1:]
    for i, other in enumerate(rest):
        for tail in _matchings(rest[:i] + rest[i + 1:]):
            yield ((first, other),) + tail


def iter_pairings(m: int) -> Iterator[tuple[tuple[int, int], ...]]:
    """Lazily yield the ``(m - 1)!!`` perfect matchings of ``{0, ..., m-1}``."""
    if m < 0 or m % 2:
        raise DomainError(f"perfect matchings need an even number of points, got {m}")
    if m > MAX_ENDPOINTS:
        raise SizeLimitError(f"{m} points exceeds the {MAX_ENDPOINTS}-point enumeration guard")
    return _matchings(list(range(m)))


def pairings(m: int) -> list[tuple[tuple[int, int], ...]]:
    return list(iter_pairings(m))


def gaussian_scalar_moment(idx, C) -> float:
    """``E[xi_{i_1} ... xi_{i_m}]`` for ``xi ~ N(0, C)`` by Isserlis' theorem."""
    c = C.entries if isinstance(C, CovarianceMatrix) else np.asarray(C, dtype=float)
    idx = [int(i) for i in idx]
    if any(i < 0 or i >= c.shape[0] for i in idx):
        raise DomainError(f"component index out of range 0..{c.shape[0] - 1}")
    if len(idx) % 2:
        return 0.0
    total = 0.0
    for matching in iter_pairings(len(idx)):
        prod = 1.0
        for a, b in matching:
            prod *= c[idx[a], idx[b]]
        total += prod
    return total


# -- words ------------------------------------------------------------------


def as_word(w) -> str:
    word = "".join(w).upper() if not isinstance(w, str) else w.upper()
    if not word or set(word) - {"X", "C"}:
        raise InvalidInputError(f"a word is a non-empty string over {{X, C}}, got {w!r}")
    return word


def endpoint_nodes(w) -> list[int]:
    """Boundary node of each Gaussian endpoint, in reading order."""
    nodes = []
    for j, letter in enumerate(as_word(w), start=1):
        if letter == "X":
            nodes += [j - 1, j]
    return nodes


def _c_edges(word: str) -> list[tuple[int, int]]:
    return [(j - 1, j) for j, letter in enumerate(word, start=1) if letter == "C"]


# -- symbolic route --------------------------------------------------------


class Term(NamedTuple):
    """``coeff * C^chain * prod(tr(C^l) for l in loops)``; ``loops`` sorted descending."""

    coeff: int
    chain: int
    loops: tuple[int, ...]


def _key(chain: int, loops) -> tuple[int, tuple[int, ...]]:
    return chain, tuple(sorted(loops, reverse=True))


@dataclass(frozen=True)
class SymbolicMoment:
    """Integer combination of ``C^c prod tr(C^l)`` monomials in canonical order.

    Canonical order sorts by ``(chain, loops)`` descending, so the highest
    matrix power comes first; zero coefficients are dropped.
    """

    terms: tuple[Term, ...] = ()

    @classmethod
    def from_counts(cls, counts) -> SymbolicMoment:
        merged: Counter = Counter()
        for (chain, loops), coeff in counts.items():
            merged[_key(chain, loops)] += int(coeff)
        ordered = sorted((k for k, v in merged.items() if v), reverse=True)
        return cls(tuple(Term(merged[k], k[0], k[1]) for k in ordered))

    @classmethod
    def from_terms(cls, terms) -> SymbolicMoment:
        counts: Counter = Counter()
        for coeff, chain, loops in terms:
            counts[_key(chain, loops)] += coeff
        return cls.from_counts(counts)

    def as_counter(self) -> Counter:
        return Counter({(t.chain, t.loops): t.coeff for t in self.terms})

    def __add__(self, other: SymbolicMoment) -> SymbolicMoment:
        counts = self.as_counter()
        counts.update(other.as_counter())
        return SymbolicMoment.from_counts(counts)

    def __neg__(self) -> SymbolicMoment:
        return SymbolicMoment(tuple(t._replace(coeff=-t.coeff) for t in self.terms))

    def __mul__(self, k: int) -> SymbolicMoment:
        return SymbolicMoment.from_counts(Counter({key: k * v for key, v in self.as_counter().items()}))

    __rmul__ = __mul__

    @property
    def coeff_sum(self) -> int:
        return sum(t.coeff for t in self.terms)

    def to_json(self) -> list[dict]:
        return [{"coeff": t.coeff, "chain": t.chain, "loops": list(t.loops)} for t in self.terms]

    @classmethod
    def from_json(cls, items) -> SymbolicMoment:
        return cls.from_terms((int(i["coeff"]), int(i["chain"]), tuple(i["loops"])) for i in items)

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for t in self.terms:
            factors = [f"tr(C^{l})" if l > 1 else "tr(C)" for l in t.loops]
            if t.chain:
                factors.append(f"C^{t.chain}" if t.chain > 1 else "C")
            body = " ".join(factors) or "I"
            if abs(t.coeff) != 1:
                body = f"{abs(t.coeff)} {body}"
            parts.append(("- " if t.coeff < 0 else "+ ") + body)
        text = " ".join(parts)
        return text[2:] if text.startswith("+ ") else "-" + text[2:]


def chain_loop_decompose(w, matching) -> tuple[int, tuple[int, ...]]:
    """Chain length and loop lengths (descending) of one pairing of ``w``'s endpoints."""
    word = as_word(w)
    p = len(word)
    nodes = endpoint_nodes(word)
    seen = sorted(i for pair in matching for i in pair)
    if seen != list(range(len(nodes))):
        raise DomainError(f"matching {matching!r} does not pair endpoints 0..{len(nodes) - 1}")
    edges = _c_edges(word) + [(nodes[a], nodes[b]) for a, b in matching]
    incident: list[list[int]] = [[] for _ in range(p + 1)]
    for e, (u, v) in enumerate(edges):
        incident[u].append(e)
        incident[v].append(e)
    used = [False] * len(edges)

    def walk(start: int, first_edge: int) -> tuple[int, int]:
        node, e, length = start, first_edge, 0
        while True:
            used[e] = True
            length += 1
            u, v = edges[e]
            node = v if node == u else u
            nxt = [f for f in incident[node] if not used[f]]
            if not nxt:
                return node, length
            e = nxt[0]

    end, chain = walk(0, incident[0][0])
    if end != p:
        raise DomainError("chain from boundary 0 does not terminate at boundary p")
    loops = []
    for e in range(len(edges)):
        if not used[e]:
            start = edges[e][0]
            _, length = walk(start, e)
            loops.append(length)
    return chain, tuple(sorted(loops, reverse=True))


def _check_word_length(word: str) -> None:
    if len(word) > MAX_WORD_LENGTH:
        raise SizeLimitError(f"word length {len(word)} exceeds {MAX_WORD_LENGTH}")


@lru_cache(maxsize=None)
def _symbolic_cached(word: str) -> SymbolicMoment:
    counts: Counter = Counter()
    for matching in iter_pairings(2 * word.count("X")):
        counts[chain_loop_decompose(word, matching)] += 1
    return SymbolicMoment.from_counts(counts)


def symbolic_word_moment(w) -> SymbolicMoment:
    word = as_word(w)
    _check_word_length(word)
    return _symbolic_cached(word)


def evaluate_symbolic(sm: SymbolicMoment, C) -> np.ndarray:
    c = C.entries if isinstance(C, CovarianceMatrix) else np.asarray(C, dtype=float)
    d = c.shape[0]
    powers = {0: np.eye(d)}

    def power(k: int) -> np.ndarray:
        if k not in powers:
            powers[k] = np.linalg.matrix_power(c, k)
        return powers[k]

    out = np.zeros((d, d))
    for t in sm.terms:
        scalar = float(t.coeff)
        for l in t.loops:
            scalar *= float(np.trace(power(l)))
        out += scalar * power(t.chain)
    return out


class Sign(enum.Enum):
    PLUS = "plus"  # (X - C)^p
    MINUS = "minus"  # (C - X)^p


@lru_cache(maxsize=None)
def _centered_cached(p: int, sign: Sign) -> SymbolicMoment:
    total = SymbolicMoment()
    for letters in itertools.product("XC", repeat=p):
        word = "".join(letters)
        k = word.count("C")
        negative = (k % 2) if sign is Sign.PLUS else ((p - k) % 2)
        sm = _symbolic_cached(word)
        total = total + (-sm if negative else sm)
    return total


def centered_moment(p: int, sign: Sign = Sign.PLUS) -> SymbolicMoment:
    """``E[(X - C)^p]`` (PLUS) or ``E[(C - X)^p]`` (MINUS), expanded over ordered words."""
    if p < 1:
        raise DomainError(f"moment order must be >= 1, got {p}")
    if p > MAX_WORD_LENGTH:
        raise SizeLimitError(f"moment order {p} exceeds {MAX_WORD_LENGTH}")
    return _centered_cached(p, Sign(sign))


# -- numeric route ---------------------------------------------------------


def numeric_word_moment(w, C) -> np.ndarray:
    """Entrywise Isserlis expectation of a word, summed over all index tuples.

    Each pairing contributes the tensor ``prod C[l_a, l_b]`` over indices
    ``l_0..l_p`` (one per boundary); the internal indices ``l_1..l_{p-1}``
    are then summed out, leaving the ``(l_0, l_p)`` entry.
    """
    word = as_word(w)
    c = C.entries if isinstance(C, CovarianceMatrix) else np.asarray(C, dtype=float)
    d, p = c.shape[0], len(word)
    n_end = 2 * word.count("X")
    work = d ** (p - 1) * double_factorial(n_end - 1)
    if work > NUMERIC_WORK_LIMIT:
        raise SizeLimitError(f"numeric moment needs {work} work units (> {NUMERIC_WORK_LIMIT})")
    nodes = endpoint_nodes(word)
    axes = p + 1

    def factor(u: int, v: int) -> np.ndarray:
        shape = [1] * axes
        if u == v:
            shape[u] = d
            return np.diag(c).reshape(shape)
        shape[u] = shape[v] = d
        block = c if u < v else c.T
        return block.reshape(shape)

    fixed = np.ones([1] * axes)
    for u, v in _c_edges(word):
        fixed = fixed * factor(u, v)
    acc = np.zeros([d] * axes)
    for matching in iter_pairings(n_end):
        t = fixed
        for a, b in matching:
            t = t * factor(nodes[a], nodes[b])
        acc += np.broadcast_to(t, acc.shape)
    return acc.sum(axis=tuple(range(1, p))) if p > 1 else acc


# -- Bernstein moment condition --------------------------------------------


class MomentKind(enum.Enum):
    RAW = "raw"  # E[X^p] vs (p!/2) B^(p-2) (tr(C) C + 2 C^2)
    CENTERED = "centered"  # E[(X - C)^p] vs (p!/2) B^(p-2) Sigma_2
    NEG_CENTERED = "neg_centered"  # E[(C - X)^p] vs the same


@dataclass(frozen=True)
class PsdCertificate:
    p: int
    kind: MomentKind
    min_eig_of_slack: float
    dominator_norm: float

    @property
    def tolerance(self) -> float:
        return PSD_RTOL * self.dominator_norm

    @property
    def passed(self) -> bool:
        return self.min_eig_of_slack >= -self.tolerance

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "kind": self.kind.value,
            "min_eig_of_slack": self.min_eig_of_slack,
            "dominator_norm": self.dominator_norm,
            "pass": self.passed,
        }


def moment_matrix(p: int, C, kind: MomentKind) -> np.ndarray:
    kind = MomentKind(kind)
    if kind is MomentKind.RAW:
        sm = symbolic_word_moment("X" * p)
    elif kind is MomentKind.CENTERED:
        sm = centered_moment(p, Sign.PLUS)
    else:
        sm = centered_moment(p, Sign.MINUS)
    return evaluate_symbolic(sm, C)


def verify_bernstein(p: int, C, kind: MomentKind) -> PsdCertificate:
    """Check ``E[Y^p] <= (p!/2) B^(p-2) M`` in Loewner order with ``B = 2 tr(C)``.

    ``M = tr(C) C + 2 C^2`` for RAW and ``Sigma_2 = tr(C) C + C^2`` otherwise.
    """
    kind = MomentKind(kind)
    if not 2 <= p <= MAX_WORD_LENGTH:
        raise DomainError(f"moment order must lie in 2..{MAX_WORD_LENGTH}, got {p}")
    c = C.entries if isinstance(C, CovarianceMatrix) else np.asarray(C, dtype=float)
    tr = float(np.trace(c))
    if tr <= 0:
        raise DomainError("C must be nonzero")
    c2 = c @ c
    m = tr * c + (2.0 if kind is MomentKind.RAW else 1.0) * c2
    dominator = math.factorial(p) / 2 * (2.0 * tr) ** (p - 2) * m
    slack = dominator - moment_matrix(p, c, kind)
    slack = 0.5 * (slack + slack.T)
    return PsdCertificate(
        p=p,
        kind=kind,
        min_eig_of_slack=float(np.linalg.eigvalsh(slack)[0]),
        dominator_norm=float(np.linalg.norm(dominator, 2)),
    )


# -- term counting ---------------------------------------------------------


def term_counts(p: int, k: int) -> tuple[int, int]:
    """(all pairings, singleton-chain pairings) over the words of length p with k C letters."""
    if p < 2:
        raise DomainError(f"term counts need p >= 2, got {p}")
    if not 0 <= k <= p:
        raise DomainError(f"k must lie in 0..{p}, got {k}")
    total = math.comb(p, k) * double_factorial(2 * p - 2 * k - 1)
    single = math.comb(p - 2, k) * double_factorial(2 * p - 2 * k - 3) if k <= p - 2 else 0
    return total, single


def enumerate_term_counts(p: int, k: int) -> tuple[int, int]:
    """The same counts as :func:`term_counts`, by exhaustive enumeration."""
    if not 0 <= k <= p:
        raise DomainError(f"k must lie in 0..{p}, got {k}")
    total = single = 0
    for c_slots in itertools.combinations(range(p), k):
        word = "".join("C" if j in c_slots else "X" for j in range(p))
        for matching in iter_pairings(2 * (p - k)):
            total += 1
            if chain_loop_decompose(word, matching)[0] == 1:
                single += 1
    return total, single


# Closed forms derived by hand for low orders; used as regression anchors.
KNOWN_CLOSED_FORMS: dict[str, SymbolicMoment] = {
    "E[XX]": SymbolicMoment.from_terms([(1, 1, (1,)), (2, 2, ())]),
    "E[XXX]": SymbolicMoment.from_terms(
        [(1, 1, (1, 1)), (2, 1, (2,)), (4, 2, (1,)), (8, 3, ())]
    ),
    "E[XCX]": SymbolicMoment.from_terms([(2, 3, ()), (1, 1, (2,))]),
    "Sigma_2": SymbolicMoment.from_terms([(1, 1, (1,)), (1, 2, ())]),
    "Sigma_3": SymbolicMoment.from_terms(
        [(1, 1, (1, 1)), (1, 1, (2,)), (2, 2, (1,)), (4, 3, ())]
    ),
}


def closed_form_checks() -> list[tuple[str, SymbolicMoment, SymbolicMoment]]:
    """(name, computed, expected) for every entry of :data:`KNOWN_CLOSED_FORMS`."""
    computed = {
        "E[XX]": symbolic_word_moment("XX"),
        "E[XXX]": symbolic_word_moment("XXX"),
        "E[XCX]": symbolic_word_moment("XCX"),
        "Sigma_2": centered_moment(2, Sign.PLUS),
        "Sigma_3": centered_moment(3, Sign.PLUS),
    }
    return [(name, computed[name], KNOWN_CLOSED_FORMS[name]) for name in KNOWN_CLOSED_FORMS]
