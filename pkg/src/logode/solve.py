"""Log-ODE stepping over a mesh, baselines, and convergence-rate studies.

One solver step replaces the driver increment over a mesh interval by its
truncated log-signature and flows the induced autonomous polynomial ODE for
unit time with classical fixed-step RK4.  Reference solutions for the rate
studies are the same scheme at a much finer mesh (the resolution is always
disclosed in the report), which the uniqueness theory licenses as oracle.

The RK4 kernel is JIT-compiled when numba is importable and falls back to a
semantically identical numpy loop otherwise.  Fixed substep counts keep every
run bit-deterministic for fixed inputs and configuration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import fields, lie, paths, tensor
from .errors import BlowUpError, DomainError, MeshError
from .fields import PolynomialVectorField
from .paths import Control, LiftedPath, TabulatedControl, roughness_degree
from .tensor import TruncatedTensor

#: accept a doubled substep count once two successive answers agree this well
SELF_DIFF_TOL = 1e-10
#: hard ceiling for automatic substep doubling
SUBSTEP_CAP = 512
#: per-step log-signatures are flagged in diagnostics beyond this Dynkin residual
LIE_WARN_TOL = 1e-9


# ---------------------------------------------------------------------------
# RK4 kernel for compiled polynomial right-hand sides

try:  # pragma: no cover - exercised implicitly by every solve
    import numba

    @numba.njit(cache=True)
    def _rk4_kernel(z0, substeps, coeffs, exps):
        e = z0.shape[0]
        n_terms = exps.shape[0]
        n_vars = exps.shape[1]
        z = z0.copy()
        rhs = np.empty(e)
        stage = np.empty(e)
        k = np.empty((4, e))
        h = 1.0 / substeps
        for s in range(substeps):
            for stage_idx in range(4):
                if stage_idx == 0:
                    for o in range(e):
                        stage[o] = z[o]
                elif stage_idx == 1 or stage_idx == 2:
                    for o in range(e):
                        stage[o] = z[o] + 0.5 * h * k[stage_idx - 1, o]
                else:
                    for o in range(e):
                        stage[o] = z[o] + h * k[2, o]
                for o in range(e):
                    rhs[o] = 0.0
                for m in range(n_terms):
                    mono = 1.0
                    for j in range(n_vars):
                        a = exps[m, j]
                        for _ in range(a):
                            mono *= stage[j]
                    for o in range(e):
                        rhs[o] += coeffs[o, m] * mono
                for o in range(e):
                    k[stage_idx, o] = rhs[o]
            for o in range(e):
                z[o] = z[o] + (h / 6.0) * (k[0, o] + 2.0 * k[1, o] + 2.0 * k[2, o] + k[3, o])
            for o in range(e):
                if not np.isfinite(z[o]):
                    return z, s
        return z, -1

    _HAVE_NUMBA = True
except Exception:  # pragma: no cover - numpy fallback environment
    _HAVE_NUMBA = False


def _rk4_numpy(z0, substeps, coeffs, exps):
    def rhs(zz):
        if exps.shape[0] == 0:
            return np.zeros_like(zz)
        monos = np.prod(zz[None, :] ** exps, axis=1)
        return coeffs @ monos

    z = z0.copy()
    h = 1.0 / substeps
    for s in range(substeps):
        k1 = rhs(z)
        k2 = rhs(z + 0.5 * h * k1)
        k3 = rhs(z + 0.5 * h * k2)
        k4 = rhs(z + h * k3)
        z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(z)):
            return z, s
    return z, -1


def _rk4(z0, substeps, coeffs, exps):
    if _HAVE_NUMBA:
        return _rk4_kernel(z0, np.int64(substeps), coeffs, exps)
    return _rk4_numpy(z0, substeps, coeffs, exps)


# ---------------------------------------------------------------------------
# configuration and result containers


@dataclass(frozen=True)
class SolverConfig:
    """Scheme parameters; ``degree`` is pinned to floor(p).

    ``mesh`` selects solver anchors: None (every driver anchor), an int
    (that many uniform steps) or an explicit time sequence.  Setting
    ``alpha`` switches to adaptive meshing driven by a control instead.
    """

    p: float
    gamma: float
    degree: int = 0
    substeps: int = 32
    substep_doubling: bool = True
    ref_refinement: int = 64
    mesh: object = None
    alpha: float | None = None
    adaptive_strategy: str = "greedy"

    def __post_init__(self):
        expected = roughness_degree(self.p)
        if self.degree == 0:
            object.__setattr__(self, "degree", expected)
        if self.degree != expected:
            raise DomainError(f"degree must equal floor(p) = {expected}, got {self.degree}")
        if not self.gamma > self.p:
            raise DomainError(f"need gamma > p, got gamma={self.gamma}, p={self.p}")
        if self.substeps < 1:
            raise DomainError("substeps must be >= 1")
        if self.ref_refinement < 1:
            raise DomainError("ref_refinement must be >= 1")
        if self.alpha is not None and not 0 < self.alpha <= 1:
            raise DomainError("alpha must lie in (0, 1]")
        if self.adaptive_strategy not in ("greedy", "dyadic"):
            raise DomainError(f"unknown adaptive strategy {self.adaptive_strategy!r}")

    def to_json_dict(self) -> dict:
        mesh = self.mesh
        if isinstance(mesh, np.ndarray):
            mesh = mesh.tolist()
        return {
            "p": self.p,
            "gamma": self.gamma,
            "degree": self.degree,
            "substeps": self.substeps,
            "substep_doubling": self.substep_doubling,
            "ref_refinement": self.ref_refinement,
            "mesh": mesh,
            "alpha": self.alpha,
            "adaptive_strategy": self.adaptive_strategy,
        }


@dataclass
class Trajectory:
    """Solver output: states on the mesh, optional full-lift elements."""

    times: np.ndarray
    states: np.ndarray
    full_lift: list[TruncatedTensor] | None = None
    step_omegas: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def to_json_dict(self) -> dict:
        out = {
            "times": self.times.tolist(),
            "states": self.states.tolist(),
            "diagnostics": self.diagnostics,
        }
        if self.full_lift is not None:
            out["full_lift"] = [
                {"t": float(t), **g.to_json_dict()}
                for t, g in zip(self.times, self.full_lift)
            ]
        if self.step_omegas is not None:
            out["step_omegas"] = self.step_omegas.tolist()
        return out


@dataclass
class StudyReport:
    """Rates measured against a disclosed reference resolution."""

    config: dict
    mesh: list
    errors: list[dict]
    slopes: dict
    reference: dict

    def to_json_dict(self) -> dict:
        return {
            "config": self.config,
            "mesh": self.mesh,
            "errors": self.errors,
            "slopes": self.slopes,
            "reference": self.reference,
        }


def fit_loglog(xs, ys) -> tuple[float, float, float]:
    """Least-squares slope/intercept/rms-residual of log(ys) against log(xs)."""
    lx = np.log(np.asarray(xs, dtype=np.float64))
    ly = np.log(np.asarray(ys, dtype=np.float64))
    design = np.vstack([lx, np.ones_like(lx)]).T
    (slope, intercept), *_ = np.linalg.lstsq(design, ly, rcond=None)
    resid = float(np.sqrt(np.mean((design @ [slope, intercept] - ly) ** 2)))
    return float(slope), float(intercept), resid


# ---------------------------------------------------------------------------
# meshes


def _mesh_indices_uniform(x: LiftedPath, count: int, i0: int = 0, i1: int | None = None) -> np.ndarray:
    i1 = len(x.times) - 1 if i1 is None else i1
    if count < 1 or count > i1 - i0:
        raise DomainError(f"cannot place {count} steps on {i1 - i0} anchor intervals")
    idx = np.rint(np.linspace(i0, i1, count + 1)).astype(int)
    if len(np.unique(idx)) != len(idx):
        raise DomainError(f"mesh of {count} steps collides on the anchor grid")
    return idx


def _greedy_adaptive_indices(x: LiftedPath, control: Control, alpha: float) -> np.ndarray:
    if control.anchors is None or len(control.anchors) != len(x.times) or not np.allclose(
        control.anchors, x.times
    ):
        raise DomainError("adaptive meshing needs a control on the path's anchor grid")

    def value(i, j):
        if isinstance(control, TabulatedControl):
            return control.value_by_index(i, j)
        return control(x.times[i], x.times[j])

    last = len(x.times) - 1
    idx = [0]
    i = 0
    while i < last:
        if value(i, i + 1) > alpha:
            raise MeshError(
                "inadmissible mesh: control exceeds alpha on indivisible "
                f"[{x.times[i]!r}, {x.times[i + 1]!r}]"
            )
        lo, hi = i + 1, last  # invariant: value(i, lo) <= alpha
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if value(i, mid) <= alpha:
                lo = mid
            else:
                hi = mid - 1
        idx.append(lo)
        i = lo
    return np.asarray(idx, dtype=int)


def _dyadic_adaptive_indices(x: LiftedPath, control: Control, alpha: float) -> np.ndarray:
    t0, t1 = float(x.times[0]), float(x.times[-1])
    if control(t0, t1) <= alpha:
        return np.asarray([0, len(x.times) - 1], dtype=int)
    for depth in range(1, 30):
        parts = paths.dyadic_partition(control, t0, t1, depth)
        leaves = parts[-1]
        if max(control(a, b) for a, b in zip(leaves[:-1], leaves[1:])) <= alpha:
            return np.asarray([x.anchor_index(t) for t in leaves], dtype=int)
    raise MeshError("dyadic refinement did not reach the alpha budget within 29 levels")


def resolve_mesh(x: LiftedPath, cfg: SolverConfig, control: Control | None = None) -> np.ndarray:
    """Mesh anchor indices into the path implied by the configuration."""
    if cfg.alpha is not None:
        if control is None:
            raise DomainError("adaptive meshing requires a control")
        if cfg.adaptive_strategy == "greedy":
            return _greedy_adaptive_indices(x, control, cfg.alpha)
        return _dyadic_adaptive_indices(x, control, cfg.alpha)
    if cfg.mesh is None:
        return np.arange(len(x.times))
    if isinstance(cfg.mesh, (int, np.integer)):
        return _mesh_indices_uniform(x, int(cfg.mesh))
    return np.asarray([x.anchor_index(t) for t in cfg.mesh], dtype=int)


# ---------------------------------------------------------------------------
# stepping


def _integrate_compiled(coeffs, exps, z, substeps, doubling):
    znew, bad = _rk4(z, substeps, coeffs, exps)
    if bad >= 0:
        raise BlowUpError(f"non-finite state at substep {bad} of {substeps}")
    if not doubling:
        return znew, substeps
    used = substeps
    while used < SUBSTEP_CAP:
        zfine, bad = _rk4(z, 2 * used, coeffs, exps)
        if bad >= 0:
            raise BlowUpError(f"non-finite state at substep {bad} of {2 * used}")
        used *= 2
        if np.linalg.norm(zfine - znew) <= SELF_DIFF_TOL:
            return zfine, used
        znew = zfine
    return znew, used


def logode_step(
    f: PolynomialVectorField,
    z,
    logsig: TruncatedTensor,
    substeps: int = 32,
    doubling: bool = True,
) -> np.ndarray:
    """Flow the log-ODE for unit time from z.

    ``substeps`` is the starting RK4 resolution; with ``doubling`` it is
    doubled until two successive answers agree to ``SELF_DIFF_TOL`` (or the
    cap is hit), which keeps the integrator error a reportable second-order
    effect.  Deterministic for fixed inputs.
    """
    if substeps < 1:
        raise DomainError("substeps must be >= 1")
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (f.e,):
        raise DomainError(f"state must have shape ({f.e},)")
    coeffs, exps = fields.combined_rhs(f, logsig)
    out, _ = _integrate_compiled(coeffs, exps, z, substeps, doubling)
    return out


def _step_log_signatures(x: LiftedPath, mesh_idx: np.ndarray, degree: int):
    """Truncated log-signature of every mesh step."""
    if x.degree < degree:
        raise DomainError(f"path degree {x.degree} below configured degree {degree}")
    out = []
    for i, j in zip(mesh_idx[:-1], mesh_idx[1:]):
        inc = x.increment_by_index(int(i), int(j))
        if x.degree > degree:
            inc = tensor.truncate(inc, degree)
        out.append(tensor.log(inc))
    return out


def _omegas_for_mesh(control, times, mesh_idx):
    if control is None:
        return None
    return np.asarray(
        [control(times[int(i)], times[int(j)]) for i, j in zip(mesh_idx[:-1], mesh_idx[1:])]
    )


def solve(
    f: PolynomialVectorField,
    x: LiftedPath,
    z0,
    cfg: SolverConfig,
    control: Control | None = None,
) -> Trajectory:
    """Concatenate log-ODE steps over the mesh.

    In adaptive mode every accepted step satisfies control <= alpha; an
    indivisible over-budget anchor step raises MeshError.
    """
    z = np.asarray(z0, dtype=np.float64).copy()
    if z.shape != (f.e,):
        raise DomainError(f"initial state must have shape ({f.e},)")
    mesh_idx = resolve_mesh(x, cfg, control)
    logsigs = _step_log_signatures(x, mesh_idx, cfg.degree)
    states = [z.copy()]
    max_sub = 0
    max_residual = 0.0
    non_lie = 0
    for ell in logsigs:
        diag = lie.is_lie(ell, tol=LIE_WARN_TOL)
        max_residual = max(max_residual, diag.max_residual)
        if not diag.is_lie:
            non_lie += 1
        coeffs, exps = fields.combined_rhs(f, ell)
        z, used = _integrate_compiled(coeffs, exps, z, cfg.substeps, cfg.substep_doubling)
        max_sub = max(max_sub, used)
        states.append(z.copy())
    times = x.times[mesh_idx]
    return Trajectory(
        times=times,
        states=np.vstack(states),
        step_omegas=_omegas_for_mesh(control, x.times, mesh_idx),
        diagnostics={
            "lie_max_residual": max_residual,
            "lie_tol": LIE_WARN_TOL,
            "non_lie_steps": non_lie,
            "substeps_used_max": max_sub,
        },
    )


def euler_solve(
    f: PolynomialVectorField,
    x: LiftedPath,
    z0,
    cfg: SolverConfig,
    control: Control | None = None,
) -> Trajectory:
    """Baseline: step by the high-order Euler displacement, no ODE flow."""
    z = np.asarray(z0, dtype=np.float64).copy()
    if z.shape != (f.e,):
        raise DomainError(f"initial state must have shape ({f.e},)")
    mesh_idx = resolve_mesh(x, cfg, control)
    states = [z.copy()]
    for i, j in zip(mesh_idx[:-1], mesh_idx[1:]):
        inc = x.increment_by_index(int(i), int(j))
        if x.degree > cfg.degree:
            inc = tensor.truncate(inc, cfg.degree)
        z = z + fields.euler_increment(f, inc, z)
        if not np.all(np.isfinite(z)):
            raise BlowUpError(f"non-finite state after Euler step at t={x.times[int(j)]!r}")
        states.append(z.copy())
    return Trajectory(
        times=x.times[mesh_idx],
        states=np.vstack(states),
        step_omegas=_omegas_for_mesh(control, x.times, mesh_idx),
        diagnostics={"scheme": "euler"},
    )


# ---------------------------------------------------------------------------
# full lift


def _full_lift_rhs(f, ell_levels, state_levels):
    """d/du of all tensor levels: level k gets sum_j y_{k-j} (x) V_j(y_1)."""
    v = fields.shuffle_expansion(f, ell_levels, state_levels[1])
    out = [np.zeros_like(lvl) for lvl in state_levels]
    for k in range(1, len(state_levels)):
        for j in range(1, k + 1):
            out[k] += np.kron(state_levels[k - j], v[j - 1])
    return out


def _rk4_levels(f, ell_levels, levels, substeps):
    h = 1.0 / substeps
    for s in range(substeps):
        k1 = _full_lift_rhs(f, ell_levels, levels)
        mid1 = [y + 0.5 * h * dy for y, dy in zip(levels, k1)]
        k2 = _full_lift_rhs(f, ell_levels, mid1)
        mid2 = [y + 0.5 * h * dy for y, dy in zip(levels, k2)]
        k3 = _full_lift_rhs(f, ell_levels, mid2)
        end = [y + h * dy for y, dy in zip(levels, k3)]
        k4 = _full_lift_rhs(f, ell_levels, end)
        levels = [
            y + (h / 6.0) * (a + 2.0 * b + 2.0 * c + d)
            for y, a, b, c, d in zip(levels, k1, k2, k3, k4)
        ]
        if not all(np.all(np.isfinite(lvl)) for lvl in levels):
            raise BlowUpError(f"non-finite full-lift state at substep {s} of {substeps}")
    return levels


def _integrate_full_lift(f, ell_levels, levels, substeps, doubling):
    cur = _rk4_levels(f, ell_levels, levels, substeps)
    if not doubling:
        return cur, substeps
    used = substeps
    while used < SUBSTEP_CAP:
        fine = _rk4_levels(f, ell_levels, levels, 2 * used)
        used *= 2
        gap = math.sqrt(sum(float(np.sum((a - b) ** 2)) for a, b in zip(fine, cur)))
        if gap <= SELF_DIFF_TOL:
            return fine, used
        cur = fine
    return cur, used


def solve_full_lift(
    f: PolynomialVectorField,
    x: LiftedPath,
    xi: TruncatedTensor,
    cfg: SolverConfig,
    control: Control | None = None,
) -> Trajectory:
    """Integrate every tensor level of the solution, not just the points.

    The scalar level stays 1, level k is driven by lower levels tensored with
    the ordered-shuffle sums evaluated at the level-1 state, and successive
    steps continue from the reached group element.
    """
    if xi.d != f.e or xi.n != cfg.degree:
        raise DomainError(f"initial element must live in degree-{cfg.degree} tensors over R^{f.e}")
    init_diag = lie.is_group_like(xi, tol=1e-7)
    if not init_diag.is_lie:
        raise DomainError(
            f"initial element is not group-like (max residual {init_diag.max_residual:.3e})"
        )
    mesh_idx = resolve_mesh(x, cfg, control)
    logsigs = _step_log_signatures(x, mesh_idx, cfg.degree)
    levels = [lvl.copy() for lvl in xi.levels]
    lift = [TruncatedTensor(f.e, cfg.degree, tuple(levels))]
    states = [levels[1].copy()]
    max_sub = 0
    for ell in logsigs:
        ell_levels = [ell.levels[k] for k in range(1, cfg.degree + 1)]
        levels, used = _integrate_full_lift(
            f, ell_levels, levels, cfg.substeps, cfg.substep_doubling
        )
        max_sub = max(max_sub, used)
        lift.append(TruncatedTensor(f.e, cfg.degree, tuple(levels)))
        states.append(levels[1].copy())
    group_residual = max(
        lie.is_group_like(g, tol=1e-7).max_residual for g in lift
    )
    return Trajectory(
        times=x.times[mesh_idx],
        states=np.vstack(states),
        full_lift=lift,
        step_omegas=_omegas_for_mesh(control, x.times, mesh_idx),
        diagnostics={
            "substeps_used_max": max_sub,
            "group_like_max_residual": group_residual,
            "group_like_tol": 1e-7,
        },
    )


def pilot_lip_estimate(
    f: PolynomialVectorField,
    x: LiftedPath,
    z0,
    cfg: SolverConfig,
    pilot_steps: int = 64,
) -> fields.LipGammaEstimate:
    """Size estimate of the field on a box calibrated by a pilot solve.

    Runs a coarse solve, then estimates on the box of radius twice the
    trajectory's sup-norm (never smaller than the field's configured box).
    """
    steps = min(pilot_steps, len(x.times) - 1)
    pilot_cfg = SolverConfig(
        p=cfg.p, gamma=cfg.gamma, degree=cfg.degree, substeps=cfg.substeps, mesh=steps,
    )
    pilot = solve(f, x, z0, pilot_cfg)
    radius = max(2.0 * float(np.max(np.abs(pilot.states))), f.box_radius)
    return fields.estimate_lip_gamma(f, radius=radius)


# ---------------------------------------------------------------------------
# rate studies


def _reference_config(cfg: SolverConfig, mesh) -> SolverConfig:
    return SolverConfig(
        p=cfg.p,
        gamma=cfg.gamma,
        degree=cfg.degree,
        substeps=min(4 * cfg.substeps, SUBSTEP_CAP),
        substep_doubling=False,
        ref_refinement=cfg.ref_refinement,
        mesh=mesh,
    )


#: errors below this floor are round-off, not method error; rate fits skip them
DEGENERATE_FLOOR = 1e-12


def _rate_slopes(xs, errs, predicted):
    mask = np.asarray(errs) > DEGENERATE_FLOOR
    if np.count_nonzero(mask) < 4:
        return {
            "fitted": None,
            "predicted": predicted,
            "residual": None,
            "degenerate": True,
        }
    slope, _, resid = fit_loglog(np.asarray(xs)[mask], np.asarray(errs)[mask])
    return {"fitted": slope, "predicted": predicted, "residual": resid, "degenerate": False}


def one_step_error_study(
    f: PolynomialVectorField,
    x: LiftedPath,
    z0,
    cfg: SolverConfig,
    intervals: Sequence[tuple[float, float]],
    control: Control,
) -> StudyReport:
    """One-step error against interval control values, log-log fitted.

    Every interval must start at the path's first anchor so the exact state
    there is the given initial condition.  The per-interval reference is the
    scheme itself on ``ref_refinement`` sub-steps at quadrupled substeps.
    """
    if len(intervals) < 4:
        raise DomainError("need at least 4 ladder intervals")
    rows = []
    omegas = []
    errors = []
    for s, t in intervals:
        i0, i1 = x.anchor_index(s), x.anchor_index(t)
        if i0 != 0:
            raise DomainError("ladder intervals must start at the path's first anchor")
        steps = min(cfg.ref_refinement, i1 - i0)
        ref_idx = _mesh_indices_uniform(x, steps, i0, i1)
        ref_cfg = _reference_config(cfg, x.times[ref_idx])
        ref = solve(f, x, z0, ref_cfg)
        inc = x.increment_by_index(i0, i1)
        if x.degree > cfg.degree:
            inc = tensor.truncate(inc, cfg.degree)
        one = logode_step(
            f, z0, tensor.log(inc), cfg.substeps, doubling=cfg.substep_doubling
        )
        err = float(np.linalg.norm(ref.final_state - one))
        om = control(s, t)
        omegas.append(om)
        errors.append(err)
        rows.append({"s": float(s), "t": float(t), "omega": om, "one_step_error": err, "ref_steps": steps})
    predicted = (cfg.degree + 1) / cfg.p
    return StudyReport(
        config=cfg.to_json_dict(),
        mesh=[list(map(float, iv)) for iv in intervals],
        errors=rows,
        slopes=_rate_slopes(omegas, errors, predicted),
        reference={"per_interval_steps": cfg.ref_refinement, "substeps": min(4 * cfg.substeps, SUBSTEP_CAP)},
    )


def global_convergence_study(
    f: PolynomialVectorField,
    x: LiftedPath,
    z0,
    cfg: SolverConfig,
    mesh_sizes: Sequence[int],
    control: Control,
) -> StudyReport:
    """Final-time error on uniform meshes against the summed-control bound.

    The per-step bound ingredient is control^((degree+1)/p), switching to
    control^degree on steps holding more than unit control.  The bound
    constant is calibrated on the coarsest mesh and then required to cover
    every finer one, which fails exactly when refinement underperforms the
    predicted rate.
    """
    if len(mesh_sizes) < 4:
        raise DomainError("need at least 4 mesh sizes")
    mesh_sizes = sorted(int(n) for n in mesh_sizes)
    ref_steps = min(cfg.ref_refinement * mesh_sizes[-1], len(x.times) - 1)
    ref_cfg = _reference_config(cfg, x.times[_mesh_indices_uniform(x, ref_steps)])
    ref = solve(f, x, z0, ref_cfg)
    exponent = (cfg.degree + 1) / cfg.p
    rows, errors, bounds = [], [], []
    for n in mesh_sizes:
        run_cfg = SolverConfig(
            p=cfg.p, gamma=cfg.gamma, degree=cfg.degree, substeps=cfg.substeps,
            substep_doubling=cfg.substep_doubling, ref_refinement=cfg.ref_refinement, mesh=n,
        )
        traj = solve(f, x, z0, run_cfg, control=control)
        err = float(np.linalg.norm(traj.final_state - ref.final_state))
        om = traj.step_omegas
        bound = float(np.sum(np.maximum(om**exponent, om ** float(cfg.degree))))
        rows.append({
            "mesh_size": n,
            "global_error": err,
            "bound_sum": bound,
            "max_step_omega": float(np.max(om)),
        })
        errors.append(err)
        bounds.append(bound)
    slopes = _rate_slopes(mesh_sizes, errors, predicted=-float(cfg.degree))
    if slopes["fitted"] is not None:
        slopes["fitted_order"] = -slopes["fitted"]
        slopes["predicted_order"] = float(cfg.degree)
    constant = errors[0] / bounds[0] if bounds[0] > 0 else 0.0
    for row in rows:
        row["bound_ok"] = bool(
            row["global_error"]
            <= max(constant * row["bound_sum"] * (1 + 1e-12), DEGENERATE_FLOOR)
        )
    slopes["bound_constant"] = constant
    slopes["bound_constant_calibration"] = "coarsest mesh"
    slopes["bound_exponent"] = exponent
    return StudyReport(
        config=cfg.to_json_dict(),
        mesh=list(mesh_sizes),
        errors=rows,
        slopes=slopes,
        reference={"mesh_steps": ref_steps, "substeps": ref_cfg.substeps},
    )


# ---------------------------------------------------------------------------
# continuity probe


@dataclass
class ContinuityReport:
    """Both sides of the stability estimate, without the unknowable constant."""

    config: dict
    alpha: float
    solution_distances: dict
    initial_gap: float
    field_gap: float
    driver_distances: dict
    omega_alpha: float
    implied_constants: dict

    def to_json_dict(self) -> dict:
        return {
            "config": self.config,
            "alpha": self.alpha,
            "solution_distances": self.solution_distances,
            "initial_gap": self.initial_gap,
            "field_gap": self.field_gap,
            "driver_distances": self.driver_distances,
            "omega_alpha": self.omega_alpha,
            "implied_constants": self.implied_constants,
        }


def _trajectory_as_lift(traj: Trajectory) -> LiftedPath:
    if traj.full_lift is None:
        raise DomainError("need a full-lift trajectory")
    return LiftedPath(traj.times, traj.full_lift)


def continuity_probe(
    f1: PolynomialVectorField,
    f2: PolynomialVectorField,
    x1: LiftedPath,
    x2: LiftedPath,
    xi1: TruncatedTensor,
    xi2: TruncatedTensor,
    cfg: SolverConfig,
    alpha: float | None = None,
) -> ContinuityReport:
    """Compare solution distances with the stability estimate's ingredients.

    Solves both systems as full lifts on the shared grid, measures the
    level-k solution distances, and reports the right-hand-side ingredients:
    initial gap, normalized-field gap (estimated at smoothness gamma - 1),
    alpha-restricted distances of the size-normalized drivers, and the
    alpha-chopped total control.  With ``alpha=None`` the smallest admissible
    budget (capped at 1) is chosen; an explicit alpha whose budget some anchor
    step already exceeds raises MeshError.
    """
    if len(x1.times) != len(x2.times) or not np.allclose(x1.times, x2.times):
        raise DomainError("drivers must share their anchor grid")
    y1 = solve_full_lift(f1, x1, xi1, cfg)
    y2 = solve_full_lift(f2, x2, xi2, cfg)
    lift1, lift2 = _trajectory_as_lift(y1), _trajectory_as_lift(y2)
    s, t = float(x1.times[0]), float(x1.times[-1])
    sol_dist = {
        k: paths.dpn_distance(lift1, lift2, k, cfg.p, s, t)
        for k in range(1, cfg.degree + 1)
    }
    norm1 = fields.estimate_lip_gamma(f1).value
    norm2 = fields.estimate_lip_gamma(f2).value
    gap_field = fields.field_difference(
        fields.scale_field(f1, 1.0 / norm1),
        fields.scale_field(f2, 1.0 / norm2),
        gamma=cfg.gamma - 1.0,
    )
    field_gap = fields.estimate_lip_gamma(gap_field).value
    initial_gap = float(np.linalg.norm(xi1.levels[1] - xi2.levels[1]))
    control = paths.SumControl(
        [paths.control_from(x1, norm1, cfg.p), paths.control_from(x2, norm2, cfg.p)]
    )
    if alpha is None:
        biggest_step = max(
            control(a, b) for a, b in zip(x1.times[:-1], x1.times[1:])
        )
        alpha = min(1.0, biggest_step * (1 + 1e-9))
    om_alpha = paths.omega_alpha(control, alpha, s, t)
    scaled1 = paths.dilate_lift(x1, norm1)
    scaled2 = paths.dilate_lift(x2, norm2)
    driver_dist = {
        n: paths.dpn_distance(scaled1, scaled2, n, cfg.p, s, t, alpha=alpha, control=control)
        for n in range(1, cfg.degree + 1)
    }
    implied = {}
    for k, lhs in sol_dist.items():
        rhs = om_alpha ** (k / cfg.p) * (initial_gap + field_gap) + sum(
            om_alpha ** (max(k - n, 0) / cfg.p) * driver_dist[n]
            for n in driver_dist
        )
        implied[k] = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else float("inf"))
    return ContinuityReport(
        config=cfg.to_json_dict(),
        alpha=alpha,
        solution_distances=sol_dist,
        initial_gap=initial_gap,
        field_gap=field_gap,
        driver_distances=driver_dist,
        omega_alpha=om_alpha,
        implied_constants=implied,
    )
