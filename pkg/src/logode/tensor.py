"""Arithmetic in the truncated tensor algebra over R^d.

Elements live in 1 + V + V^2 + ... + V^n (V = R^d) and are stored densely:
level k is a flat float64 array of length d**k in lexicographic word order,
letters running over 1..d.  With that ordering the tensor product of two
levels is a Kronecker product, which keeps every operation a short chain of
numpy calls.

Per-level norms are plain Euclidean norms.  The symmetric group permutes
word coordinates, so permutations are isometries, and the Euclidean norm is
a cross norm; both properties are relied on by the tests.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import DomainError

#: absolute tolerance for "scalar part equals 1 (or 0)" domain checks
SCALAR_TOL = 1e-9


def word_index(d: int, word: Sequence[int]) -> int:
    """Index of a word (letters in 1..d) inside its level's flat array."""
    idx = 0
    for letter in word:
        if not 1 <= letter <= d:
            raise DomainError(f"letter {letter} outside alphabet 1..{d}")
        idx = idx * d + (letter - 1)
    return idx


def index_word(d: int, k: int, idx: int) -> tuple[int, ...]:
    """Inverse of :func:`word_index` for words of length k."""
    letters = []
    for _ in range(k):
        idx, rem = divmod(idx, d)
        letters.append(rem + 1)
    return tuple(reversed(letters))


def iter_words(d: int, k: int) -> Iterator[tuple[int, ...]]:
    """All words of length k over 1..d, in index order."""
    for idx in range(d**k):
        yield index_word(d, k, idx)


@dataclass(frozen=True)
class TruncatedTensor:
    """An element of the degree-n truncated tensor algebra over R^d.

    ``levels[k]`` is the flat level-k coefficient array (length d**k);
    ``levels[0]`` is the scalar part.  Instances are immutable: the arrays
    are marked read-only, so values can be shared freely across threads.
    """

    d: int
    n: int
    levels: tuple[np.ndarray, ...]

    def __post_init__(self):
        if self.d < 1 or self.n < 1:
            raise DomainError("dimension and degree must be positive")
        if len(self.levels) != self.n + 1:
            raise DomainError(f"expected {self.n + 1} levels, got {len(self.levels)}")
        canonical = []
        for k, lvl in enumerate(self.levels):
            arr = np.ascontiguousarray(lvl, dtype=np.float64)
            if arr.shape != (self.d**k,):
                raise DomainError(f"level {k} must have d**k = {self.d ** k} entries")
            if not np.all(np.isfinite(arr)):
                raise DomainError(f"level {k} contains non-finite coefficients")
            arr.flags.writeable = False
            canonical.append(arr)
        object.__setattr__(self, "levels", tuple(canonical))

    # -- accessors ---------------------------------------------------------

    def level(self, k: int) -> np.ndarray:
        if not 0 <= k <= self.n:
            raise DomainError(f"level {k} out of range 0..{self.n}")
        return self.levels[k]

    @property
    def scalar(self) -> float:
        return float(self.levels[0][0])

    def coeff(self, word: Sequence[int]) -> float:
        """Coefficient of a word (an empty word addresses the scalar part)."""
        k = len(word)
        return float(self.level(k)[word_index(self.d, word)])

    # -- linear structure ----------------------------------------------------

    def _like(self, levels) -> "TruncatedTensor":
        return TruncatedTensor(self.d, self.n, tuple(levels))

    def __add__(self, other: "TruncatedTensor") -> "TruncatedTensor":
        _check_shapes(self, other)
        return self._like(a + b for a, b in zip(self.levels, other.levels))

    def __sub__(self, other: "TruncatedTensor") -> "TruncatedTensor":
        _check_shapes(self, other)
        return self._like(a - b for a, b in zip(self.levels, other.levels))

    def __neg__(self) -> "TruncatedTensor":
        return self._like(-a for a in self.levels)

    def __mul__(self, scale) -> "TruncatedTensor":
        c = float(scale)
        return self._like(c * a for a in self.levels)

    __rmul__ = __mul__

    def __matmul__(self, other: "TruncatedTensor") -> "TruncatedTensor":
        return mul(self, other)

    # -- serialization -------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {"d": self.d, "n": self.n, "levels": [lvl.tolist() for lvl in self.levels]}

    @classmethod
    def from_json_dict(cls, obj: dict) -> "TruncatedTensor":
        return cls(int(obj["d"]), int(obj["n"]), tuple(np.asarray(l) for l in obj["levels"]))

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    def __repr__(self) -> str:
        return f"TruncatedTensor(d={self.d}, n={self.n}, scalar={self.scalar:.3g})"


def _check_shapes(a: TruncatedTensor, b: TruncatedTensor) -> None:
    if a.d != b.d or a.n != b.n:
        raise DomainError(f"shape mismatch: (d={a.d}, n={a.n}) vs (d={b.d}, n={b.n})")


# -- constructors -------------------------------------------------------------


def zero(d: int, n: int) -> TruncatedTensor:
    return TruncatedTensor(d, n, tuple(np.zeros(d**k) for k in range(n + 1)))


def unit(d: int, n: int) -> TruncatedTensor:
    levels = [np.zeros(d**k) for k in range(n + 1)]
    levels[0][0] = 1.0
    return TruncatedTensor(d, n, tuple(levels))


def from_level_one(vec: Sequence[float], n: int) -> TruncatedTensor:
    """Embed a vector of R^d as a pure level-1 element."""
    v = np.asarray(vec, dtype=np.float64)
    levels = [np.zeros(len(v) ** k) for k in range(n + 1)]
    levels[1] = v
    return TruncatedTensor(len(v), n, tuple(levels))


def basis_word(d: int, n: int, word: Sequence[int]) -> TruncatedTensor:
    """The basis element e_{i_1} (x) ... (x) e_{i_k} for a word."""
    k = len(word)
    if k > n:
        raise DomainError(f"word length {k} exceeds degree {n}")
    levels = [np.zeros(d**j) for j in range(n + 1)]
    levels[k][word_index(d, word)] = 1.0
    return TruncatedTensor(d, n, tuple(levels))


# -- named operations ----------------------------------------------------------


def level_norm(t: TruncatedTensor, k: int) -> float:
    """Euclidean norm of level k (a cross norm, invariant under word permutations)."""
    return float(np.linalg.norm(t.level(k)))


def additive_norm(t: TruncatedTensor) -> float:
    """Sum of per-level norms over levels 0..n (the norm of the ambient Banach space)."""
    return float(sum(np.linalg.norm(lvl) for lvl in t.levels))


def _mul_levels(d: int, n: int, a_levels, b_levels) -> list[np.ndarray]:
    out = []
    for k in range(n + 1):
        acc = np.zeros(d**k)
        for j in range(k + 1):
            # outer product of flat levels == concatenation of words in
            # lexicographic order (same layout as np.kron, much cheaper here)
            acc += (a_levels[j][:, None] * b_levels[k - j][None, :]).reshape(-1)
        out.append(acc)
    return out


def mul(a: TruncatedTensor, b: TruncatedTensor) -> TruncatedTensor:
    """Truncated tensor product: level k of the result convolves the factors' levels."""
    _check_shapes(a, b)
    return TruncatedTensor(a.d, a.n, tuple(_mul_levels(a.d, a.n, a.levels, b.levels)))


def _require_scalar(t: TruncatedTensor, value: float, what: str) -> None:
    if abs(t.scalar - value) > SCALAR_TOL:
        raise DomainError(f"{what} requires scalar part {value:g}, got {t.scalar!r}")


def _unit_levels(d: int, n: int) -> list[np.ndarray]:
    out = [np.zeros(d**k) for k in range(n + 1)]
    out[0][0] = 1.0
    return out


def _shifted_levels(g: TruncatedTensor, offset: float) -> list[np.ndarray]:
    x = [lvl.copy() for lvl in g.levels]
    x[0][0] += offset
    return x


def inverse(g: TruncatedTensor) -> TruncatedTensor:
    """Group inverse of an element with unit scalar part."""
    _require_scalar(g, 1.0, "inverse")
    x = _shifted_levels(g, -1.0)
    # 1/(1+x) = 1 - x + x^2 - ... truncates after n terms since pi_0(x) = 0;
    # Horner form: acc <- 1 - x (x) acc, n times
    acc = _unit_levels(g.d, g.n)
    for _ in range(g.n):
        acc = [-lvl for lvl in _mul_levels(g.d, g.n, x, acc)]
        acc[0][0] += 1.0
    return TruncatedTensor(g.d, g.n, tuple(acc))


def exp(a: TruncatedTensor) -> TruncatedTensor:
    """Truncated exponential of an element with zero scalar part."""
    _require_scalar(a, 0.0, "exp")
    # Horner form of 1 + a(1 + a/2(1 + a/3(...))): acc <- 1 + (a (x) acc)/j
    acc = _unit_levels(a.d, a.n)
    for j in range(a.n, 0, -1):
        acc = [lvl / j for lvl in _mul_levels(a.d, a.n, a.levels, acc)]
        acc[0][0] += 1.0
    return TruncatedTensor(a.d, a.n, tuple(acc))


def log(g: TruncatedTensor) -> TruncatedTensor:
    """Truncated logarithm of an element with unit scalar part."""
    _require_scalar(g, 1.0, "log")
    x = _shifted_levels(g, -1.0)
    # Horner form of x(c_1 + x(c_2 + ... + x c_n)), c_j = (-1)^(j+1)/j
    acc = _unit_levels(g.d, g.n)
    acc[0][0] = (-1.0) ** (g.n + 1) / g.n
    for j in range(g.n - 1, 0, -1):
        acc = _mul_levels(g.d, g.n, x, acc)
        acc[0][0] += (-1.0) ** (j + 1) / j
    return TruncatedTensor(g.d, g.n, tuple(_mul_levels(g.d, g.n, x, acc)))


def dilation(lam: float, g: TruncatedTensor) -> TruncatedTensor:
    """Scale level k by lam**k."""
    if not lam > 0:
        raise DomainError(f"dilation factor must be positive, got {lam}")
    return TruncatedTensor(g.d, g.n, tuple((lam**k) * lvl for k, lvl in enumerate(g.levels)))


def homogeneous_norm(g: TruncatedTensor, upto: int | None = None) -> float:
    """Sum over k of ||level k||**(1/k); scales linearly under dilation.

    ``upto`` restricts the sum to levels 1..upto (default: all levels), which
    is what p-variation at a roughness below the stored degree needs.
    """
    _require_scalar(g, 1.0, "homogeneous_norm")
    top = g.n if upto is None else upto
    if not 1 <= top <= g.n:
        raise DomainError(f"level cap {top} out of range 1..{g.n}")
    return float(sum(np.linalg.norm(g.levels[k]) ** (1.0 / k) for k in range(1, top + 1)))


def truncate(g: TruncatedTensor, m: int) -> TruncatedTensor:
    """Project onto the degree-m truncation (m <= n)."""
    if not 1 <= m <= g.n:
        raise DomainError(f"target degree {m} out of range 1..{g.n}")
    return TruncatedTensor(g.d, m, g.levels[: m + 1])
