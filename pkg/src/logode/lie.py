"""Free-Lie structure inside the truncated tensor algebra.

Lie-ness of a tensor is tested with the Dynkin (right-nested bracketing)
map: a homogeneous level-k element is a Lie element iff the map returns k
times the element.  Group-likeness is tested by taking the logarithm and
testing that.  The word shuffle product is provided as the independent
oracle for group-likeness used by the test-suite.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import tensor
from .errors import DomainError
from .tensor import TruncatedTensor

Word = tuple[int, ...]


@dataclass(frozen=True)
class LieDiagnostic:
    """Per-level residuals of the Dynkin criterion.

    ``residuals[k-1]`` is ||rho(a_k) - k a_k|| / max(1, ||a_k||) for level k.
    """

    residuals: tuple[float, ...]
    tol: float

    @property
    def is_lie(self) -> bool:
        return all(r <= self.tol for r in self.residuals)

    @property
    def max_residual(self) -> float:
        return max(self.residuals)

    def to_json_dict(self) -> dict:
        return {
            "residuals": list(self.residuals),
            "tol": self.tol,
            "is_lie": self.is_lie,
        }


def _rho_level(arr: np.ndarray, d: int, k: int) -> np.ndarray:
    """Right-nested bracketing r(v1 (x) ... (x) vk) = [v1, [..., [v_{k-1}, vk]]]."""
    if k == 1:
        return arr.copy()
    blocks = arr.reshape(d, d ** (k - 1))
    out = np.zeros(d**k)
    head = out.reshape(d, d ** (k - 1))
    tail = out.reshape(d ** (k - 1), d)
    for i in range(d):
        t = _rho_level(blocks[i], d, k - 1)
        head[i] += t  # e_i (x) t
        tail[:, i] -= t  # t (x) e_i
    return out


def dynkin_map(a: TruncatedTensor) -> TruncatedTensor:
    """Apply right-nested bracketing level by level (identity on level 1)."""
    if abs(a.scalar) > tensor.SCALAR_TOL:
        raise DomainError("dynkin_map requires zero scalar part")
    levels = [np.zeros(1)]
    for k in range(1, a.n + 1):
        levels.append(_rho_level(a.levels[k], a.d, k))
    return TruncatedTensor(a.d, a.n, tuple(levels))


def is_lie(a: TruncatedTensor, tol: float = 1e-9) -> LieDiagnostic:
    """Dynkin criterion with per-level relative residuals."""
    rho = dynkin_map(a)
    residuals = []
    for k in range(1, a.n + 1):
        defect = np.linalg.norm(rho.levels[k] - k * a.levels[k])
        residuals.append(float(defect / max(1.0, np.linalg.norm(a.levels[k]))))
    return LieDiagnostic(tuple(residuals), tol)


def is_group_like(g: TruncatedTensor, tol: float = 1e-8) -> LieDiagnostic:
    """A unit-scalar element is group-like iff its logarithm is Lie."""
    return is_lie(tensor.log(g), tol)


def bch(a: TruncatedTensor, b: TruncatedTensor) -> TruncatedTensor:
    """Truncated Baker-Campbell-Hausdorff combination log(exp(a) exp(b))."""
    return tensor.log(tensor.mul(tensor.exp(a), tensor.exp(b)))


def shuffle_product(u: Word, v: Word) -> Counter:
    """Multiset of all order-preserving interleavings of two words."""
    u, v = tuple(u), tuple(v)
    k, total = len(u), len(u) + len(v)
    out: Counter = Counter()
    for slots in combinations(range(total), k):
        word = [0] * total
        ui = iter(u)
        vi = iter(v)
        taken = set(slots)
        for pos in range(total):
            word[pos] = next(ui) if pos in taken else next(vi)
        out[tuple(word)] += 1
    return out


def shuffle_pairing_defect(g: TruncatedTensor, u: Word, v: Word) -> float:
    """|<g,u><g,v> - sum_{w in u shuffle v} <g,w>| for a unit-scalar element.

    Vanishes exactly on group-like elements; the empty word pairs to the
    scalar part.
    """
    if len(u) + len(v) > g.n:
        raise DomainError(f"|u| + |v| = {len(u) + len(v)} exceeds degree {g.n}")
    lhs = g.coeff(u) * g.coeff(v)
    rhs = sum(mult * g.coeff(w) for w, mult in shuffle_product(u, v).items())
    return abs(lhs - rhs)
