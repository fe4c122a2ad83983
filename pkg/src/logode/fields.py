"""Polynomial driving vector fields and the directional-derivative calculus.

A field assigns to each driver letter i in 1..d a polynomial map f_i from
state space R^e to itself.  Polynomials keep every derivative exact, so the
nested operators needed by high-order Euler and log-ODE schemes reduce to
symbolic polynomial algebra done once, plus cheap array evaluation per call.

Two routes compute the degree-k Euler terms:

- the composition recursion (``f_circ_k``), building r -> Dr[f_i] maps; and
- the ordered-shuffle expansion, assembling tensor products of lower-order
  pieces over block permutations.

They are kept separate on purpose; the test-suite pins them against each
other level by level.
"""

from __future__ import annotations

import itertools
import math
import threading
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .tensor import TruncatedTensor, word_index

# ---------------------------------------------------------------------------
# scalar polynomials on R^e (exponent multi-index -> coefficient)


class _Poly:
    """Immutable-by-convention sparse polynomial in e variables."""

    __slots__ = ("e", "terms")

    def __init__(self, e: int, terms: dict[tuple[int, ...], float] | None = None):
        self.e = e
        self.terms = {} if terms is None else {k: v for k, v in terms.items() if v != 0.0}

    @classmethod
    def constant(cls, e: int, value: float) -> "_Poly":
        return cls(e, {(0,) * e: float(value)})

    @classmethod
    def coordinate(cls, e: int, m: int) -> "_Poly":
        exp = [0] * e
        exp[m] = 1
        return cls(e, {tuple(exp): 1.0})

    def add(self, other: "_Poly") -> "_Poly":
        out = dict(self.terms)
        for exp, c in other.terms.items():
            out[exp] = out.get(exp, 0.0) + c
        return _Poly(self.e, out)

    def scale(self, c: float) -> "_Poly":
        return _Poly(self.e, {exp: c * v for exp, v in self.terms.items()})

    def mul(self, other: "_Poly") -> "_Poly":
        out: dict[tuple[int, ...], float] = {}
        for ea, ca in self.terms.items():
            for eb, cb in other.terms.items():
                key = tuple(a + b for a, b in zip(ea, eb))
                out[key] = out.get(key, 0.0) + ca * cb
        return _Poly(self.e, out)

    def derivative(self, m: int) -> "_Poly":
        out: dict[tuple[int, ...], float] = {}
        for exp, c in self.terms.items():
            if exp[m] == 0:
                continue
            new = list(exp)
            new[m] -= 1
            key = tuple(new)
            out[key] = out.get(key, 0.0) + c * exp[m]
        return _Poly(self.e, out)

    def shift(self, eta: np.ndarray) -> "_Poly":
        """Re-expand z -> z + eta exactly (binomial expansion per variable)."""
        out: dict[tuple[int, ...], float] = {}
        for exp, c in self.terms.items():
            per_axis = []
            for m, a in enumerate(exp):
                per_axis.append(
                    [(b, math.comb(a, b) * eta[m] ** (a - b)) for b in range(a + 1)]
                )
            for combo in itertools.product(*per_axis):
                key = tuple(b for b, _ in combo)
                value = c
                for _, w in combo:
                    value *= w
                out[key] = out.get(key, 0.0) + value
        return _Poly(self.e, out)

    def degree(self) -> int:
        return max((sum(exp) for exp in self.terms), default=0)

    def __call__(self, z: np.ndarray) -> float:
        total = 0.0
        for exp, c in self.terms.items():
            v = c
            for m, a in enumerate(exp):
                if a:
                    v *= z[m] ** a
            total += v
        return total


def _poly_zero(e: int) -> _Poly:
    return _Poly(e)


PolyMap = tuple[_Poly, ...]


def _identity_map(e: int) -> PolyMap:
    return tuple(_Poly.coordinate(e, m) for m in range(e))


def _directional_derivative(r: PolyMap, direction: PolyMap) -> PolyMap:
    """z -> Dr(z)[direction(z)], one symbolic step of the composition recursion."""
    e = len(direction)
    out = []
    for r_o in r:
        acc = _poly_zero(e)
        for m in range(e):
            acc = acc.add(r_o.derivative(m).mul(direction[m]))
        out.append(acc)
    return tuple(out)


def _compile_map(polys: PolyMap) -> tuple[np.ndarray, np.ndarray]:
    """Shared-basis arrays (coeffs (e_out, M), exps (M, e)) for fast evaluation."""
    e = polys[0].e
    basis = sorted({exp for p in polys for exp in p.terms})
    index = {exp: i for i, exp in enumerate(basis)}
    coeffs = np.zeros((len(polys), len(basis)))
    for o, p in enumerate(polys):
        for exp, c in p.terms.items():
            coeffs[o, index[exp]] = c
    exps = (
        np.array(basis, dtype=np.int64)
        if basis
        else np.zeros((0, e), dtype=np.int64)
    )
    return coeffs, exps


def _eval_compiled(coeffs: np.ndarray, exps: np.ndarray, z: np.ndarray) -> np.ndarray:
    if exps.shape[0] == 0:
        return np.zeros(coeffs.shape[0])
    monos = np.prod(z[None, :] ** exps, axis=1)
    return coeffs @ monos


def _eval_compiled_batch(coeffs: np.ndarray, exps: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Evaluate at many points: returns (n_points, e_out)."""
    if exps.shape[0] == 0:
        return np.zeros((pts.shape[0], coeffs.shape[0]))
    monos = np.prod(pts[:, None, :] ** exps[None, :, :], axis=2)
    return monos @ coeffs.T


# ---------------------------------------------------------------------------
# the vector field


def _gamma_floor(gamma: float) -> int:
    """Largest integer strictly less than gamma."""
    return int(math.ceil(gamma)) - 1


class PolynomialVectorField:
    """d polynomial fields on R^e with exact cached derivative tensors.

    ``gamma`` fixes how many derivatives the smoothness budget allows
    (derivative tensors are available up to order strictly below gamma) and
    ``box_radius`` is the default box on which the Lip-gamma size of the
    field is estimated.  Instances are immutable; internal caches are
    lock-protected.
    """

    def __init__(self, d: int, e: int, gamma: float, box_radius: float, polys):
        if d < 1 or e < 1:
            raise DomainError("need d >= 1 driver letters and e >= 1 state dimensions")
        if not gamma > 0:
            raise DomainError("gamma must be positive")
        if not box_radius > 0:
            raise DomainError("box_radius must be positive")
        polys = tuple(tuple(p for p in pm) for pm in polys)
        if len(polys) != d or any(len(pm) != e for pm in polys):
            raise DomainError("need one length-e polynomial map per letter")
        self.d = d
        self.e = e
        self.gamma = float(gamma)
        self.box_radius = float(box_radius)
        self.polys = polys
        self.max_degree = max((p.degree() for pm in polys for p in pm), default=0)
        self._lock = threading.Lock()
        self._word_maps: dict[tuple[int, ...], PolyMap] = {}
        self._word_compiled: dict[tuple[int, ...], tuple[np.ndarray, np.ndarray]] = {}
        self._level_eval: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self._derivs: dict[tuple[int, int], np.ndarray] = {}
        self._rhs_basis: dict[int, tuple[np.ndarray, list[np.ndarray]]] = {}

    # -- basic structure ----------------------------------------------------

    @property
    def gamma_floor(self) -> int:
        return _gamma_floor(self.gamma)

    def field_map(self, letter: int) -> PolyMap:
        if not 1 <= letter <= self.d:
            raise DomainError(f"letter {letter} outside 1..{self.d}")
        return self.polys[letter - 1]

    def evaluate(self, letter: int, z) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        return np.array([p(z) for p in self.field_map(letter)])

    def derivative_tensor(self, letter: int, order: int) -> np.ndarray:
        """Polynomials of D^order f_letter as an object array (e, e, ..., e).

        Entry [o, m1, ..., mj] is the exact partial d^j f_o / dz_m1 ... dz_mj,
        symmetric in the m's.
        """
        if order < 0 or order > self.gamma_floor:
            raise DomainError(
                f"derivative order {order} outside 0..{self.gamma_floor} allowed by gamma"
            )
        key = (letter, order)
        with self._lock:
            hit = self._derivs.get(key)
        if hit is not None:
            return hit
        base = self.field_map(letter)
        shape = (self.e,) * (order + 1)
        out = np.empty(shape, dtype=object)
        for o in range(self.e):
            for multi in itertools.product(range(self.e), repeat=order):
                p = base[o]
                for m in multi:
                    p = p.derivative(m)
                out[(o, *multi)] = p
        with self._lock:
            self._derivs[key] = out
        return out

    def evaluate_derivative(self, letter: int, order: int, z) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        tensors = self.derivative_tensor(letter, order)
        out = np.zeros(tensors.shape)
        for idx in np.ndindex(tensors.shape):
            out[idx] = tensors[idx](z)
        return out

    # -- nested directional derivatives --------------------------------------

    def word_polymap(self, word: tuple[int, ...]) -> PolyMap:
        """The polynomial map z -> f^{comp k}(e_word)(Id)(z), cached per word.

        The composition applies the last letter innermost: a one-letter word
        gives the field itself, (i, j) gives z -> Df_j(z)[f_i(z)], and so on.
        """
        word = tuple(int(w) for w in word)
        if not word:
            raise DomainError("need a non-empty word")
        if len(word) > self.gamma_floor + 1:
            raise DomainError(
                f"word length {len(word)} exceeds gamma budget {self.gamma_floor + 1}"
            )
        with self._lock:
            hit = self._word_maps.get(word)
        if hit is not None:
            return hit
        r = _identity_map(self.e)
        for letter in reversed(word):
            r = _directional_derivative(r, self.field_map(letter))
        with self._lock:
            self._word_maps[word] = r
        return r

    def word_polymap_compiled(self, word: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
        word = tuple(int(w) for w in word)
        with self._lock:
            hit = self._word_compiled.get(word)
        if hit is not None:
            return hit
        compiled = _compile_map(self.word_polymap(word))
        with self._lock:
            self._word_compiled[word] = compiled
        return compiled

    def level_evaluator(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """One compiled map stacking all d**k word maps of length k.

        Evaluating it at z and reshaping gives the (d**k, e) matrix whose
        rows are f^{comp k}(word)(Id)(z) in word order.
        """
        with self._lock:
            hit = self._level_eval.get(k)
        if hit is not None:
            return hit
        polys: list[_Poly] = []
        for word in itertools.product(range(1, self.d + 1), repeat=k):
            polys.extend(self.word_polymap(word))
        compiled = _compile_map(tuple(polys))
        with self._lock:
            self._level_eval[k] = compiled
        return compiled

    def level_matrix(self, k: int, z: np.ndarray) -> np.ndarray:
        coeffs, exps = self.level_evaluator(k)
        return _eval_compiled(coeffs, exps, z).reshape(self.d**k, self.e)

    def rhs_basis(self, top: int) -> tuple[np.ndarray, list[np.ndarray]]:
        """Union monomial basis for the log-ODE field up to tensor level ``top``.

        Returns (exps (M, e), [A_1, ..., A_top]) where A_l has shape
        (e, M, d**l) and maps level-l tensor coefficients linearly onto
        monomial coefficients; see :func:`combined_rhs`.
        """
        if top > self.gamma_floor + 1:
            raise DomainError(f"degree {top} exceeds the gamma budget {self.gamma_floor + 1}")
        with self._lock:
            hit = self._rhs_basis.get(top)
        if hit is not None:
            return hit
        per_level = [self.level_evaluator(l) for l in range(1, top + 1)]
        union = sorted({tuple(row) for _, exps in per_level for row in exps})
        index = {row: i for i, row in enumerate(union)}
        exps_union = (
            np.array(union, dtype=np.int64)
            if union
            else np.zeros((0, self.e), dtype=np.int64)
        )
        mats = []
        for l, (coeffs, exps) in enumerate(per_level, start=1):
            a = np.zeros((self.e, len(union), self.d**l))
            cols = [index[tuple(row)] for row in exps]
            for w in range(self.d**l):
                for o in range(self.e):
                    a[o, cols, w] = coeffs[w * self.e + o]
            mats.append(a)
        out = (exps_union, mats)
        with self._lock:
            self._rhs_basis[top] = out
        return out

    # -- serialization --------------------------------------------------------

    def to_json_dict(self) -> dict:
        fields = []
        for letter in range(1, self.d + 1):
            terms = []
            for o, p in enumerate(self.field_map(letter)):
                for exp, c in sorted(p.terms.items()):
                    terms.append(
                        {"out_coord": o + 1, "coeff": c, "exponents": list(exp)}
                    )
            fields.append({"letter": letter, "terms": terms})
        return {
            "d": self.d,
            "e": self.e,
            "gamma": self.gamma,
            "box_radius": self.box_radius,
            "fields": fields,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "PolynomialVectorField":
        d, e = int(obj["d"]), int(obj["e"])
        by_letter = {int(f["letter"]): f["terms"] for f in obj["fields"]}
        if sorted(by_letter) != list(range(1, d + 1)):
            raise DomainError(f"need terms for exactly the letters 1..{d}")
        polys = []
        for letter in range(1, d + 1):
            comps = [dict() for _ in range(e)]
            for term in by_letter[letter]:
                o = int(term["out_coord"]) - 1
                exp = tuple(int(a) for a in term["exponents"])
                if not 0 <= o < e or len(exp) != e or any(a < 0 for a in exp):
                    raise DomainError(f"bad term {term} for letter {letter}")
                comps[o][exp] = comps[o].get(exp, 0.0) + float(term["coeff"])
            polys.append(tuple(_Poly(e, c) for c in comps))
        return cls(d, e, float(obj["gamma"]), float(obj["box_radius"]), polys)


def from_linear_maps(matrices, gamma: float, box_radius: float) -> PolynomialVectorField:
    """Convenience constructor for linear fields f_i(z) = A_i z."""
    mats = [np.asarray(a, dtype=np.float64) for a in matrices]
    e = mats[0].shape[0]
    polys = []
    for a in mats:
        if a.shape != (e, e):
            raise DomainError("all matrices must be square and share size")
        comp = []
        for o in range(e):
            terms = {}
            for m in range(e):
                if a[o, m] != 0.0:
                    exp = [0] * e
                    exp[m] = 1
                    terms[tuple(exp)] = float(a[o, m])
            comp.append(_Poly(e, terms))
        polys.append(tuple(comp))
    return PolynomialVectorField(len(mats), e, gamma, box_radius, polys)


def translate(f: PolynomialVectorField, eta) -> PolynomialVectorField:
    """The field z -> f(z + eta), re-expanded exactly."""
    eta = np.asarray(eta, dtype=np.float64)
    if eta.shape != (f.e,):
        raise DomainError(f"eta must have shape ({f.e},)")
    polys = tuple(tuple(p.shift(eta) for p in pm) for pm in f.polys)
    return PolynomialVectorField(f.d, f.e, f.gamma, f.box_radius, polys)


def scale_field(f: PolynomialVectorField, c: float, gamma: float | None = None) -> PolynomialVectorField:
    """The field c * f (optionally re-tagged with a different gamma)."""
    polys = tuple(tuple(p.scale(float(c)) for p in pm) for pm in f.polys)
    return PolynomialVectorField(f.d, f.e, f.gamma if gamma is None else gamma, f.box_radius, polys)


def field_difference(
    f1: PolynomialVectorField, f2: PolynomialVectorField, gamma: float | None = None
) -> PolynomialVectorField:
    """The field f1 - f2 (letters and state space must agree)."""
    if (f1.d, f1.e) != (f2.d, f2.e):
        raise DomainError("fields must share driver letters and state dimension")
    polys = tuple(
        tuple(a.add(b.scale(-1.0)) for a, b in zip(pm1, pm2))
        for pm1, pm2 in zip(f1.polys, f2.polys)
    )
    gamma = min(f1.gamma, f2.gamma) if gamma is None else gamma
    return PolynomialVectorField(f1.d, f1.e, gamma, min(f1.box_radius, f2.box_radius), polys)


# ---------------------------------------------------------------------------
# f^{comp k} and the ordered-shuffle expansion


def f_circ_k(f: PolynomialVectorField, v, z, k: int | None = None) -> np.ndarray:
    """Nested directional derivative applied to the identity, linear in v.

    ``v`` is a flat level-k coefficient array (length d**k).  ``k`` may be
    omitted when it is determined by the length (it is ambiguous for d = 1).
    """
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    z = np.asarray(z, dtype=np.float64)
    if k is None:
        if f.d == 1:
            raise DomainError("k is ambiguous for d = 1; pass it explicitly")
        k = round(math.log(len(v)) / math.log(f.d))
    if f.d**k != len(v):
        raise DomainError(f"level array of length {len(v)} is not d**k for k={k}")
    if k > f.gamma_floor + 1:
        raise DomainError(f"k = {k} exceeds the gamma budget {f.gamma_floor + 1}")
    return v @ f.level_matrix(k, z)


def ordered_shuffles(*block_sizes: int) -> frozenset[tuple[int, ...]]:
    """Permutations increasing within each block and across block ends.

    ``sigma`` is returned as the tuple of images (sigma(1), ..., sigma(k)).
    """
    if not block_sizes or any(j < 1 for j in block_sizes):
        raise DomainError("block sizes must be positive integers")
    k = sum(block_sizes)
    ends = list(itertools.accumulate(block_sizes))
    starts = [0] + ends[:-1]
    out = []
    for sigma in itertools.permutations(range(1, k + 1)):
        ok = all(
            sigma[m] < sigma[m + 1] for a, b in zip(starts, ends) for m in range(a, b - 1)
        )
        ok = ok and all(sigma[a - 1] < sigma[b - 1] for a, b in zip(ends[:-1], ends[1:]))
        if ok:
            out.append(sigma)
    return frozenset(out)


def _compositions(total: int, parts: int):
    """Ordered tuples of `parts` positive integers summing to `total`."""
    if parts == 1:
        yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in _compositions(total - first, parts - 1):
            yield (first, *rest)


_PLAN_CACHE: dict[tuple[int, int], list] = {}
_PLAN_LOCK = threading.Lock()


def _shuffle_plan(d: int, top: int) -> list:
    """All (n, l, factor_sizes, reorder) tuples needed to expand levels 1..top.

    ``reorder`` maps a flat level-l coefficient array to the coefficient of
    the concatenated block words, leftmost tensor factor first, so
    ``coeffs[reorder]`` reshaped to one axis per entry of ``factor_sizes``
    contracts axis by axis with the per-block evaluation matrices.
    """
    key = (d, top)
    with _PLAN_LOCK:
        hit = _PLAN_CACHE.get(key)
    if hit is not None:
        return hit
    plan = []
    for l in range(1, top + 1):
        words = list(itertools.product(range(1, d + 1), repeat=l))
        for n in range(1, l + 1):
            for blocks in _compositions(l, n):
                ends = list(itertools.accumulate(blocks))
                starts = [0] + ends[:-1]
                for sigma in ordered_shuffles(*blocks):
                    reorder = np.empty(d**l, dtype=np.int64)
                    for w_idx, w in enumerate(words):
                        # letter at label m (1-based labels descend left to right)
                        permuted = [w[l - sigma[m - 1]] for m in range(1, l + 1)]
                        concat = []
                        for b in range(n, 0, -1):  # leftmost factor is the top block
                            top_lbl, bot_lbl = ends[b - 1], starts[b - 1] + 1
                            concat.extend(
                                permuted[m - 1] for m in range(top_lbl, bot_lbl - 1, -1)
                            )
                        reorder[word_index(d, concat)] = w_idx
                    factor_sizes = tuple(reversed(blocks))
                    plan.append((n, l, factor_sizes, reorder))
    with _PLAN_LOCK:
        _PLAN_CACHE[key] = plan
    return plan


_EINSUM_AXES = "abcde"
_EINSUM_OUT = "vwxyz"


def shuffle_expansion(f: PolynomialVectorField, arg_levels, z) -> list[np.ndarray]:
    """Ordered-shuffle expansion of sum_k F^{comp k}(pi_k arg)(Id)(1 (+) z).

    ``arg_levels[l-1]`` is the flat level-l coefficient array of the argument
    tensor (levels 1..K over R^d).  Returns the output levels 1..K over R^e;
    level n collects every composition of every k >= n into n blocks.
    """
    z = np.asarray(z, dtype=np.float64)
    top = len(arg_levels)
    if top > f.gamma_floor + 1:
        raise DomainError(f"degree {top} exceeds the gamma budget {f.gamma_floor + 1}")
    level_mats = {j: f.level_matrix(j, z) for j in range(1, top + 1)}
    out = [np.zeros(f.e**n) for n in range(1, top + 1)]
    for n, l, factor_sizes, reorder in _shuffle_plan(f.d, top):
        coeffs = np.asarray(arg_levels[l - 1], dtype=np.float64).reshape(-1)[reorder]
        ct = coeffs.reshape(tuple(f.d**j for j in factor_sizes))
        # contract one axis per block with that block's evaluation matrix
        in_axes = _EINSUM_AXES[:n]
        operands = [ct]
        script = [in_axes]
        for pos, j in enumerate(factor_sizes):
            operands.append(level_mats[j])
            script.append(f"{in_axes[pos]}{_EINSUM_OUT[pos]}")
        spec = ",".join(script) + "->" + _EINSUM_OUT[:n]
        out[n - 1] += np.einsum(spec, *operands).reshape(-1)
    return out


def euler_increment(f: PolynomialVectorField, g: TruncatedTensor, z) -> np.ndarray:
    """Displacement of the high-order Euler step for a group increment g."""
    if g.d != f.d:
        raise DomainError(f"group element over R^{g.d} but field has d = {f.d}")
    if abs(g.scalar - 1.0) > 1e-9:
        raise DomainError("euler_increment requires unit scalar part")
    z = np.asarray(z, dtype=np.float64)
    out = np.zeros(f.e)
    for k in range(1, g.n + 1):
        out += f_circ_k(f, g.levels[k], z, k=k)
    return out


def euler_expansion_via_shuffles(
    f: PolynomialVectorField, g: TruncatedTensor, z
) -> list[np.ndarray]:
    """All output levels of the Euler expansion, assembled from ordered shuffles."""
    if g.d != f.d:
        raise DomainError(f"group element over R^{g.d} but field has d = {f.d}")
    if abs(g.scalar - 1.0) > 1e-9:
        raise DomainError("expansion requires unit scalar part")
    return shuffle_expansion(f, [g.levels[k] for k in range(1, g.n + 1)], z)


def euler_increment_via_shuffles(
    f: PolynomialVectorField, g: TruncatedTensor, z
) -> np.ndarray:
    """Level-1 reading of the ordered-shuffle expansion; cross-validates euler_increment."""
    return euler_expansion_via_shuffles(f, g, z)[0]


def combined_rhs(
    f: PolynomialVectorField, ell: TruncatedTensor
) -> tuple[np.ndarray, np.ndarray]:
    """Compiled coefficients (C (e, M), exps (M, e)) of z -> log_ode_rhs(f, ell, z).

    The combination is linear in the levels of ``ell``, so building it per
    solver step costs a few small matrix products.
    """
    if ell.d != f.d:
        raise DomainError(f"argument over R^{ell.d} but field has d = {f.d}")
    exps, mats = f.rhs_basis(ell.n)
    coeffs = np.zeros((f.e, exps.shape[0]))
    for l in range(1, ell.n + 1):
        coeffs += mats[l - 1] @ ell.levels[l]
    return coeffs, exps


def log_ode_rhs(f: PolynomialVectorField, ell: TruncatedTensor, z) -> np.ndarray:
    """The autonomous vector field of the log-ODE step, linear in ell.

    The caller is expected to have checked (or to record) how Lie the
    argument is; a non-Lie argument is computed all the same.
    """
    if ell.d != f.d:
        raise DomainError(f"argument over R^{ell.d} but field has d = {f.d}")
    if abs(ell.scalar) > 1e-9:
        raise DomainError("log_ode_rhs requires zero scalar part")
    z = np.asarray(z, dtype=np.float64)
    out = np.zeros(f.e)
    for k in range(1, ell.n + 1):
        out += f_circ_k(f, ell.levels[k], z, k=k)
    return out


# ---------------------------------------------------------------------------
# Lip-gamma size estimate


@dataclass(frozen=True)
class LipGammaEstimate:
    """Estimated Lip-gamma size of a field on a centred box.

    ``value`` maxes the sampled sup-norms of the derivative tensors with the
    sampled Hoelder quotient of the top one.  Everything here is a sampled
    estimate on deterministic nested grids (finer grids for larger radii
    contain the coarser ones, so the estimate grows with the radius).
    """

    gamma: float
    box_radius: float
    value: float
    derivative_sups: tuple[float, ...]
    holder_constant: float

    def to_json_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "box_radius": self.box_radius,
            "value": self.value,
            "derivative_sups": list(self.derivative_sups),
            "holder_constant": self.holder_constant,
            "estimated": True,
        }


def _box_grid(e: int, radius: float, per_axis: int) -> np.ndarray:
    axes = [np.linspace(-radius, radius, per_axis)] * e
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def estimate_lip_gamma(
    f: PolynomialVectorField, radius: float | None = None
) -> LipGammaEstimate:
    """Sampled |f|_gamma on the box [-R, R]^e; an estimate, not a bound."""
    radius = f.box_radius if radius is None else float(radius)
    if not radius > 0:
        raise DomainError("radius must be positive")
    top = f.gamma_floor
    frac = f.gamma - top  # in (0, 1]
    grid = _box_grid(f.e, radius, 9 if f.e <= 2 else 5)
    sups = []
    for order in range(top + 1):
        sq = np.zeros(len(grid))
        for letter in range(1, f.d + 1):
            tensors = f.derivative_tensor(letter, order)
            flat = tuple(tensors[idx] for idx in np.ndindex(tensors.shape))
            coeffs, exps = _compile_map(flat)
            vals = _eval_compiled_batch(coeffs, exps, grid)
            sq += np.sum(vals**2, axis=1)
        sups.append(float(np.max(np.sqrt(sq))))
    # Hoelder quotient of the top derivative over all pairs of a coarse nested subgrid
    sub = _box_grid(f.e, radius, 5 if f.e <= 2 else 3)
    stacked = []
    for letter in range(1, f.d + 1):
        tensors = f.derivative_tensor(letter, top)
        flat = tuple(tensors[idx] for idx in np.ndindex(tensors.shape))
        coeffs, exps = _compile_map(flat)
        stacked.append(_eval_compiled_batch(coeffs, exps, sub))
    values = np.concatenate(stacked, axis=1)
    diffs = values[:, None, :] - values[None, :, :]
    dist = np.linalg.norm(sub[:, None, :] - sub[None, :, :], axis=2)
    iu = np.triu_indices(len(sub), k=1)
    quotients = np.linalg.norm(diffs[iu], axis=1) / dist[iu] ** frac
    holder = float(np.max(quotients)) if len(quotients) else 0.0
    value = max(max(sups), holder)
    return LipGammaEstimate(f.gamma, radius, value, tuple(sups), holder)
