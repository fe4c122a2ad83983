"""Driving signals: lifted paths, p-variation, controls and partition ops.

A lifted path stores running group products from the start time; increments
come from ``X_s^{-1} (x) X_t``.  Every supremum over partitions is taken over
anchor-time partitions: on the represented data that supremum is exact, and
refining the anchors is the caller's resolution knob.  The dynamic programs
here are cross-checked against brute-force partition enumeration in the
test-suite.
"""

from __future__ import annotations

import csv
import math
import threading
from dataclasses import dataclass

import numpy as np

from . import tensor
from .errors import BisectionError, DomainError, MeshError, ParseError
from .tensor import TruncatedTensor

#: relative bisection tolerance for balanced splits of a control
DYADIC_TOL = 1e-8


def roughness_degree(p: float) -> int:
    """Largest integer <= p (the truncation level a p-rough path carries)."""
    if p < 1:
        raise DomainError(f"p must be >= 1, got {p}")
    return int(math.floor(p))


def _anchor_index(times: np.ndarray, t: float, what: str = "time") -> int:
    idx = int(np.searchsorted(times, t))
    for j in (idx - 1, idx):
        if 0 <= j < len(times) and math.isclose(times[j], t, rel_tol=1e-12, abs_tol=1e-14):
            return j
    raise DomainError(f"{what} {t!r} is not an anchor time")


# ---------------------------------------------------------------------------
# sample paths


@dataclass(frozen=True)
class SamplePath:
    """Raw input samples before lifting: strictly increasing times, points in R^d."""

    times: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        t = np.ascontiguousarray(self.times, dtype=np.float64)
        x = np.ascontiguousarray(self.points, dtype=np.float64)
        if t.ndim != 1 or x.ndim != 2 or len(t) != len(x):
            raise DomainError("need times (N+1,) and points (N+1, d)")
        if len(t) < 2:
            raise DomainError("need at least 2 samples")
        if not np.all(np.diff(t) > 0):
            raise DomainError("times must be strictly increasing")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(x))):
            raise DomainError("non-finite sample data")
        t.flags.writeable = False
        x.flags.writeable = False
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "points", x)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @classmethod
    def from_csv(cls, filename: str) -> "SamplePath":
        """Read ``t,x1,...,xd`` rows; raises ParseError with the offending line."""
        with open(filename, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise ParseError(f"{filename}: empty file") from None
            header = [h.strip() for h in header]
            if len(header) < 2 or header[0] != "t" or header[1:] != [
                f"x{i}" for i in range(1, len(header))
            ]:
                raise ParseError(f"{filename}:1: header must be t,x1,...,xd, got {header}")
            d = len(header) - 1
            times, points = [], []
            for lineno, row in enumerate(reader, start=2):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != d + 1:
                    raise ParseError(f"{filename}:{lineno}: expected {d + 1} columns, got {len(row)}")
                try:
                    values = [float(c) for c in row]
                except ValueError as exc:
                    raise ParseError(f"{filename}:{lineno}: {exc}") from None
                times.append(values[0])
                points.append(values[1:])
        if len(times) < 2:
            raise ParseError(f"{filename}: need at least 2 samples")
        try:
            return cls(np.asarray(times), np.asarray(points))
        except DomainError as exc:
            raise ParseError(f"{filename}: {exc}") from None

    def to_csv(self, filename: str) -> None:
        with open(filename, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t"] + [f"x{i}" for i in range(1, self.dim + 1)])
            for t, x in zip(self.times, self.points):
                writer.writerow([repr(float(t))] + [repr(float(c)) for c in x])


# ---------------------------------------------------------------------------
# lifted paths


class LiftedPath:
    """Group-valued path on an anchor grid, stored as running products.

    ``elements[j]`` is the product of the segment lifts over ``[t_0, t_j]``
    (so ``elements[0]`` is the unit).  Immutable after construction; the
    internal inverse cache is lock-protected so instances can be shared
    across threads.
    """

    def __init__(self, times, elements: list[TruncatedTensor]):
        t = np.ascontiguousarray(times, dtype=np.float64)
        if t.ndim != 1 or len(t) != len(elements):
            raise DomainError("times and elements must align")
        if len(t) < 1 or not np.all(np.diff(t) > 0):
            raise DomainError("anchor times must be strictly increasing")
        d, n = elements[0].d, elements[0].n
        for g in elements:
            if g.d != d or g.n != n:
                raise DomainError("all elements must share shape")
            if abs(g.scalar - 1.0) > tensor.SCALAR_TOL:
                raise DomainError("lifted-path elements must have unit scalar part")
        t.flags.writeable = False
        self.times = t
        self.d = d
        self.degree = n
        # level k coefficients of all running products, stacked: (N+1, d**k)
        self.level_stacks = [
            np.vstack([g.levels[k] for g in elements]) for k in range(n + 1)
        ]
        for stack in self.level_stacks:
            stack.flags.writeable = False
        self._inv_cache: dict[int, tuple[np.ndarray, ...]] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self.times)

    def anchor_index(self, t: float) -> int:
        return _anchor_index(self.times, t)

    def element(self, j: int) -> TruncatedTensor:
        """Running product over [t_0, t_j]."""
        return TruncatedTensor(
            self.d, self.degree, tuple(stack[j] for stack in self.level_stacks)
        )

    def _inverse_levels(self, i: int) -> tuple[np.ndarray, ...]:
        with self._lock:
            hit = self._inv_cache.get(i)
        if hit is not None:
            return hit
        inv = tensor.inverse(self.element(i)).levels
        with self._lock:
            self._inv_cache[i] = inv
        return inv

    def increment_by_index(self, i: int, j: int) -> TruncatedTensor:
        if not 0 <= i <= j < len(self.times):
            raise DomainError(f"bad anchor index pair ({i}, {j})")
        if i == j:
            return tensor.unit(self.d, self.degree)
        if i == 0:
            return self.element(j)
        return tensor.mul(
            TruncatedTensor(self.d, self.degree, self._inverse_levels(i)), self.element(j)
        )

    def increment(self, s: float, t: float) -> TruncatedTensor:
        """X_{s,t} = X_s^{-1} (x) X_t for anchor times s <= t."""
        i, j = self.anchor_index(s), self.anchor_index(t)
        if i > j:
            raise DomainError("increment requires s <= t")
        return self.increment_by_index(i, j)

    def increment_levels_from(self, i: int, j_hi: int) -> list[np.ndarray]:
        """Levels of X_{t_i, t_j} for all j in (i, j_hi], vectorized over j.

        Returns one (j_hi - i, d**k) array per level k.
        """
        inv = self._inverse_levels(i) if i > 0 else tensor.unit(self.d, self.degree).levels
        sl = slice(i + 1, j_hi + 1)
        m = j_hi - i
        out = []
        for k in range(self.degree + 1):
            acc = np.zeros((m, self.d**k))
            for a in range(k + 1):
                right = self.level_stacks[k - a][sl]
                if a == 0:
                    acc += right
                else:
                    contrib = inv[a][None, :, None] * right[:, None, :]
                    acc += contrib.reshape(m, -1)
            out.append(acc)
        return out

    # -- serialization ------------------------------------------------------

    def to_json_list(self) -> list[dict]:
        return [
            {"t": float(t), **self.element(j).to_json_dict()}
            for j, t in enumerate(self.times)
        ]

    @classmethod
    def from_json_list(cls, items: list[dict]) -> "LiftedPath":
        times = [item["t"] for item in items]
        elements = [TruncatedTensor.from_json_dict(item) for item in items]
        return cls(np.asarray(times), elements)


def dilate_lift(x: LiftedPath, lam: float) -> LiftedPath:
    """Apply the dilation by lam to every stored element."""
    return LiftedPath(x.times, [tensor.dilation(lam, x.element(j)) for j in range(len(x))])


def lift_piecewise_linear(path: SamplePath, degree: int) -> LiftedPath:
    """Chain segment exponentials: the signature of the piecewise-linear path.

    Increments are multiplicative over anchors by construction (the Chen
    identity holds up to floating-point reassociation).
    """
    if degree < 1:
        raise DomainError("degree must be >= 1")
    g = tensor.unit(path.dim, degree)
    elements = [g]
    deltas = np.diff(path.points, axis=0)
    for step in deltas:
        g = tensor.mul(g, tensor.exp(tensor.from_level_one(step, degree)))
        elements.append(g)
    return LiftedPath(path.times, elements)


def pure_area_driver(c: float, times, d: int = 2) -> LiftedPath:
    """Degree-2 driver exp(t c [e1,e2]): zero displacement, growing area.

    No continuous bounded-variation path lifts to it, which is exactly why it
    is useful as a beyond-BV test signal.
    """
    if d < 2:
        raise DomainError("pure-area driver needs d >= 2")
    t = np.ascontiguousarray(times, dtype=np.float64)
    area = tensor.basis_word(d, 2, (1, 2)) - tensor.basis_word(d, 2, (2, 1))
    elements = [tensor.exp(float(tj - t[0]) * c * area) for tj in t]
    return LiftedPath(t, elements)


# ---------------------------------------------------------------------------
# p-variation and controls


def _weight_row(x: LiftedPath, u: int, i1: int, m: int, p: float) -> np.ndarray:
    """|||X_{t_u, t_v}|||^p (levels 1..m) for v in (u, i1], vectorized over v."""
    levels = x.increment_levels_from(u, i1)
    hom = np.zeros(i1 - u)
    for k in range(1, m + 1):
        hom += np.linalg.norm(levels[k], axis=1) ** (1.0 / k)
    return hom**p


def _pair_weight_matrix(x: LiftedPath, i0: int, i1: int, m: int, p: float) -> np.ndarray:
    """W[u, v] = |||X_{t_u, t_v}|||^p for i0 <= u < v <= i1, local indexing."""
    size = i1 - i0 + 1
    w = np.zeros((size, size))
    for u in range(i0, i1):
        w[u - i0, u - i0 + 1 :] = _weight_row(x, u, i1, m, p)
    return w


def _pvar_dp(weights: np.ndarray) -> np.ndarray:
    """best[v] = max over partitions of [0, v] of the summed weights."""
    size = len(weights)
    best = np.zeros(size)
    for v in range(1, size):
        best[v] = np.max(best[:v] + weights[:v, v])
    return best


def _pvar_value_streaming(x: LiftedPath, i0: int, i1: int, m: int, p: float) -> float:
    """Same supremum as _pvar_dp over [i0, i1] with O(window) memory.

    Rows are final by the time they are consumed: best[u] only depends on
    rows before u, so a single forward sweep of running maxima is exact.
    """
    size = i1 - i0 + 1
    best = np.full(size, -np.inf)
    best[0] = 0.0
    for u in range(size - 1):
        row = best[u] + _weight_row(x, i0 + u, i1, m, p)
        np.maximum(best[u + 1 :], row, out=best[u + 1 :])
    return float(best[-1])


def p_variation(x: LiftedPath, p: float, s: float, t: float) -> float:
    """Supremum over anchor partitions of (sum |||X_{t_j,t_{j+1}}|||^p)^(1/p)."""
    m = roughness_degree(p)
    if m > x.degree:
        raise DomainError(f"floor(p) = {m} exceeds path degree {x.degree}")
    i, j = x.anchor_index(s), x.anchor_index(t)
    if i > j:
        raise DomainError("p_variation requires s <= t")
    if i == j:
        return 0.0
    return float(_pvar_value_streaming(x, i, j, m, p) ** (1.0 / p))


class Control:
    """A nonnegative, diagonally-vanishing, sub-additive interval function.

    ``anchors`` (when not None) is the grid on which partition-based
    operations (omega_alpha, dpn_distance, adaptive meshing) are allowed to
    place partition points.  ``continuous`` says whether the control may be
    evaluated between anchors, which is what balanced bisection needs.
    """

    anchors: np.ndarray | None = None
    continuous: bool = False

    def __call__(self, s: float, t: float) -> float:
        raise NotImplementedError

    def omega_matrix(self, i0: int, i1: int) -> np.ndarray:
        """Values on all anchor pairs i0 <= u <= v <= i1 (upper triangle), local indexing."""
        if self.anchors is None:
            raise DomainError("control has no anchor grid")
        size = i1 - i0 + 1
        out = np.zeros((size, size))
        for u in range(size):
            for v in range(u + 1, size):
                out[u, v] = self(self.anchors[i0 + u], self.anchors[i0 + v])
        return out


class FunctionControl(Control):
    """Closed-form control; continuity in the endpoints is the caller's promise."""

    continuous = True

    def __init__(self, fn, anchors=None):
        self.fn = fn
        self.anchors = None if anchors is None else np.ascontiguousarray(anchors, dtype=np.float64)

    def __call__(self, s: float, t: float) -> float:
        if t < s:
            raise DomainError("control requires s <= t")
        value = float(self.fn(s, t))
        if not value >= 0.0:
            raise DomainError(f"control must be nonnegative, got {value} on [{s}, {t}]")
        return value


class TabulatedControl(Control):
    """|f|^p times the p-variation of a lifted path, tabulated on its anchors.

    Values are computed by a window-local dynamic program and memoized per
    anchor-index pair; the cache is lock-protected, so instances can be
    shared across solver threads.  Cost is O(window^2) per fresh query.
    """

    def __init__(self, x: LiftedPath, f_norm: float, p: float):
        if not f_norm > 0:
            raise DomainError("f_norm must be positive")
        m = roughness_degree(p)
        if m > x.degree:
            raise DomainError(f"floor(p) = {m} exceeds path degree {x.degree}")
        self.path = x
        self.f_norm = float(f_norm)
        self.p = float(p)
        self.level_cap = m
        self.anchors = x.times
        self._values: dict[tuple[int, int], float] = {}
        self._lock = threading.Lock()

    def value_by_index(self, i: int, j: int) -> float:
        if i == j:
            return 0.0
        key = (i, j)
        with self._lock:
            hit = self._values.get(key)
        if hit is not None:
            return hit
        value = float(
            self.f_norm**self.p
            * _pvar_value_streaming(self.path, i, j, self.level_cap, self.p)
        )
        with self._lock:
            self._values[key] = value
        return value

    def __call__(self, s: float, t: float) -> float:
        i = _anchor_index(self.anchors, s)
        j = _anchor_index(self.anchors, t)
        if i > j:
            raise DomainError("control requires s <= t")
        return self.value_by_index(i, j)

    def omega_matrix(self, i0: int, i1: int) -> np.ndarray:
        # one weight matrix for the window, then a DP sweep per left anchor
        weights = _pair_weight_matrix(self.path, i0, i1, self.level_cap, self.p)
        size = i1 - i0 + 1
        out = np.zeros((size, size))
        scale = self.f_norm**self.p
        with self._lock:
            for u in range(size - 1):
                row = _pvar_dp(weights[u:, u:])
                out[u, u + 1 :] = scale * row[1:]
                for v in range(u + 1, size):
                    self._values.setdefault((i0 + u, i0 + v), float(out[u, v]))
        return out


def control_from(x: LiftedPath, f_norm: float, p: float) -> TabulatedControl:
    """The solution-scale control |f|^p ||X||_{p-var}^p on the path's anchors."""
    return TabulatedControl(x, f_norm, p)


class SumControl(Control):
    """Sum of controls over a shared anchor grid (sub-additive again)."""

    def __init__(self, parts: list[Control]):
        if not parts:
            raise DomainError("need at least one control")
        grids = [c.anchors for c in parts]
        if any(g is None for g in grids):
            raise DomainError("summands must carry anchor grids")
        if any(len(g) != len(grids[0]) or not np.allclose(g, grids[0]) for g in grids[1:]):
            raise DomainError("summands must share their anchor grid")
        self.parts = list(parts)
        self.anchors = grids[0]

    def __call__(self, s: float, t: float) -> float:
        return sum(c(s, t) for c in self.parts)

    def omega_matrix(self, i0: int, i1: int) -> np.ndarray:
        out = self.parts[0].omega_matrix(i0, i1)
        for c in self.parts[1:]:
            out = out + c.omega_matrix(i0, i1)
        return out


def omega_alpha(control: Control, alpha: float, s: float, t: float) -> float:
    """Supremum of summed control values over partitions whose pieces stay <= alpha.

    Raises MeshError when a single anchor step already exceeds alpha (the
    value is not defined by any admissible partition in that case).
    """
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    if control.anchors is None:
        raise DomainError("omega_alpha needs a control with an anchor grid")
    i0 = _anchor_index(control.anchors, s)
    i1 = _anchor_index(control.anchors, t)
    if i0 > i1:
        raise DomainError("omega_alpha requires s <= t")
    if i0 == i1:
        return 0.0
    om = control.omega_matrix(i0, i1)
    steps = np.diag(om, k=1)
    if np.any(steps > alpha):
        bad = int(np.argmax(steps > alpha))
        raise MeshError(
            "inadmissible mesh: control exceeds alpha on indivisible "
            f"[{control.anchors[i0 + bad]!r}, {control.anchors[i0 + bad + 1]!r}] "
            f"({steps[bad]:.6g} > {alpha:.6g})"
        )
    feasible = np.where(om <= alpha, om, -np.inf)
    size = i1 - i0 + 1
    best = np.zeros(size)
    for v in range(1, size):
        best[v] = np.max(best[:v] + feasible[:v, v])
    return float(best[-1])


def dpn_distance(
    x1: LiftedPath,
    x2: LiftedPath,
    level: int,
    p: float,
    s: float,
    t: float,
    alpha: float | None = None,
    control: Control | None = None,
) -> float:
    """Level-n distance between two lifts over a shared anchor grid.

    Maximizes sum ||pi_n(X1_{u,v}) - pi_n(X2_{u,v})||^(p/n) over anchor
    partitions (optionally restricted to pieces with control <= alpha) and
    returns the (n/p)-th power of the supremum.
    """
    if x1.d != x2.d or len(x1.times) != len(x2.times) or not np.allclose(
        x1.times, x2.times, rtol=1e-12, atol=1e-14
    ):
        raise DomainError("lifted paths must share their anchor grid")
    if not 1 <= level <= min(x1.degree, x2.degree):
        raise DomainError(f"level {level} out of range for degrees {x1.degree}, {x2.degree}")
    if not 1 <= roughness_degree(p):
        raise DomainError("p must be >= 1")
    i0, i1 = x1.anchor_index(s), x1.anchor_index(t)
    if i0 > i1:
        raise DomainError("dpn_distance requires s <= t")
    if i0 == i1:
        return 0.0
    size = i1 - i0 + 1
    weights = np.zeros((size, size))
    for u in range(i0, i1):
        l1 = x1.increment_levels_from(u, i1)[level]
        l2 = x2.increment_levels_from(u, i1)[level]
        weights[u - i0, u - i0 + 1 :] = np.linalg.norm(l1 - l2, axis=1) ** (p / level)
    if alpha is not None:
        if control is None:
            raise DomainError("alpha restriction needs a control")
        om = control.omega_matrix(i0, i1)
        steps = np.diag(om, k=1)
        if np.any(steps > alpha):
            bad = int(np.argmax(steps > alpha))
            raise MeshError(
                "inadmissible mesh: control exceeds alpha on indivisible "
                f"[{x1.times[i0 + bad]!r}, {x1.times[i0 + bad + 1]!r}]"
            )
        weights = np.where(om <= alpha, weights, -np.inf)
    best = np.zeros(size)
    for v in range(1, size):
        best[v] = np.max(best[:v] + weights[:v, v])
    return float(best[-1] ** (level / p))


# ---------------------------------------------------------------------------
# dyadic partition of a control


def _bisect_continuous(control: Control, u: float, v: float, target_tol: float) -> float:
    """Split point w with control(u,w) ~= control(w,v); assumes continuity."""
    parent = control(u, v)
    if parent == 0.0:
        return 0.5 * (u + v)
    lo, hi = u, v
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        gap = control(u, mid) - control(mid, v)
        if abs(gap) <= target_tol * parent:
            return mid
        if gap < 0:
            lo = mid
        else:
            hi = mid
    mid = 0.5 * (lo + hi)
    achieved = abs(control(u, mid) - control(mid, v))
    raise BisectionError(
        f"cannot bisect [{u!r}, {v!r}]: imbalance {achieved:.3e} "
        f"exceeds {target_tol:.1e} x {parent:.3e}",
        achieved,
    )


def _bisect_tabulated(control: Control, u: float, v: float, target_tol: float) -> float:
    parent = control(u, v)
    anchors = control.anchors
    i0 = _anchor_index(anchors, u)
    i1 = _anchor_index(anchors, v)
    if i1 - i0 < 2:
        raise BisectionError(
            f"cannot bisect [{u!r}, {v!r}]: no interior anchors", parent
        )
    candidates = anchors[i0 + 1 : i1]
    gaps = np.array([abs(control(u, w) - control(w, v)) for w in candidates])
    best = int(np.argmin(gaps))
    if parent > 0 and gaps[best] > target_tol * parent:
        raise BisectionError(
            f"cannot bisect [{u!r}, {v!r}]: best imbalance {gaps[best]:.3e} "
            f"exceeds {target_tol:.1e} x {parent:.3e}",
            float(gaps[best]),
        )
    return float(candidates[best])


def dyadic_partition(control: Control, s: float, t: float, levels: int) -> list[list[float]]:
    """Nested partitions splitting every interval into control-equal halves.

    Level l has 2**l intervals; each split point balances the control to
    within ``DYADIC_TOL`` relative to the parent, so each child carries at
    most (1/2 + DYADIC_TOL) of the parent's control.
    """
    if levels < 0:
        raise DomainError("levels must be >= 0")
    if t <= s:
        raise DomainError("need s < t")
    bisect = _bisect_continuous if control.continuous else _bisect_tabulated
    out = [[float(s), float(t)]]
    for _ in range(levels):
        prev = out[-1]
        nxt = [prev[0]]
        for u, v in zip(prev[:-1], prev[1:]):
            w = bisect(control, u, v, DYADIC_TOL)
            parent = control(u, v)
            for child in ((u, w), (w, v)):
                if control(*child) > (0.5 + DYADIC_TOL) * parent:
                    raise BisectionError(
                        f"child {child!r} holds more than half of its parent's control",
                        control(*child) - 0.5 * parent,
                    )
            nxt.extend([w, v])
        out.append(nxt)
    return out
