"""Fixed-step simulator for dynamics that mix continuous flow with jumps.

A system owns two regimes: a flow map ``xdot = F(x)`` that applies while the
flow-set indicator is non-positive, and a jump map ``x+ in G(x)`` that applies
while the jump-set indicator is non-positive.  Indicators are signed reals:
values <= 0 mean "inside the set", and their zero level set is the boundary.
The two sets must jointly cover every reachable state; a state outside both
(beyond ``event_tol``) is a modelling error, not a normal termination.

Solutions live on a hybrid time domain (t, j): flow advances t along segments
of constant jump counter j, and each jump increments j while t stands still.
Integration is explicit fixed-step 4th-order Runge-Kutta.  When a step crosses
a set boundary the crossing is located by bisection on the step fraction,
re-integrating the partial step, so every accepted sample respects its set
within ``event_tol``.  Everything here is deterministic: the same spec, state
and config produce bit-identical arcs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterator

import numpy as np

from .errors import (
    CoverageViolation,
    DimensionMismatch,
    EmptyJumpSet,
    NoSignChange,
    NonFiniteState,
    NotInJumpSet,
)

# Termination reasons stored on HybridArc.termination.
TERM_T_MAX = "t_max"
TERM_J_MAX = "j_max"
TERM_DEAD_END = "dead_end"

# Consecutive zero-flow-time jumps tolerated before a rate warning is issued.
# This is a diagnostic for near-Zeno behaviour; the hard stop is j_max.
ZENO_WARN_AFTER = 100

_PROGRESS_EPS = 1e-15


class Priority(Enum):
    """Which regime wins where the flow and jump sets overlap."""

    JUMP = "jump"
    FLOW = "flow"


@dataclass(frozen=True)
class SimConfig:
    """Integrator settings.

    dt         fixed flow step (final step of a segment may be shorter)
    t_max      flow-time horizon
    j_max      jump budget; exceeding it ends the run, it is not an error
    event_tol  tolerance on set-indicator values at accepted samples
    priority   regime choice on the overlap of the two sets
    """

    dt: float
    t_max: float
    j_max: int = 10_000
    event_tol: float = 1e-10
    priority: Priority = Priority.JUMP

    def __post_init__(self):
        if not (self.dt > 0.0 and np.isfinite(self.dt)):
            raise ValueError(f"dt must be positive and finite, got {self.dt}")
        if not (self.t_max >= 0.0 and np.isfinite(self.t_max)):
            raise ValueError(f"t_max must be non-negative, got {self.t_max}")
        if self.j_max < 0:
            raise ValueError(f"j_max must be non-negative, got {self.j_max}")
        if not (self.event_tol > 0.0):
            raise ValueError(f"event_tol must be positive, got {self.event_tol}")


@dataclass
class HybridSystemSpec:
    """A simulable hybrid system over flat state vectors of length ``dim``.

    flow_map      state -> time derivative, used while flowing
    jump_map      state -> ordered list of candidate post-states; the engine
                  deterministically applies the first candidate, so producers
                  put their preferred selection at index 0
    in_flow_set   state -> signed indicator, <= 0 inside the flow set
    in_jump_set   state -> signed indicator, <= 0 inside the jump set
    project_flow  optional hook applied to each accepted flow sample; used to
                  clamp one-step constraint overshoot back onto an admissible
                  set.  Projections are counted on the arc.
    """

    dim: int
    flow_map: Callable[[np.ndarray], np.ndarray]
    jump_map: Callable[[np.ndarray], list]
    in_flow_set: Callable[[np.ndarray], float]
    in_jump_set: Callable[[np.ndarray], float]
    project_flow: Callable[[np.ndarray], np.ndarray] | None = None


@dataclass
class FlowSegment:
    """Samples of one flow interval at constant jump counter j."""

    j: int
    ts: np.ndarray
    xs: np.ndarray  # shape (len(ts), dim)


@dataclass
class JumpEvent:
    """One recorded jump.  n_candidates > 1 marks an argmin tie."""

    t: float
    j_pre: int
    x_pre: np.ndarray
    x_post: np.ndarray
    n_candidates: int = 1


@dataclass
class HybridArc:
    """A simulated solution: flow segments separated by jumps."""

    segments: list[FlowSegment]
    jumps: list[JumpEvent]
    termination: str
    n_clamped: int = 0
    notes: list[str] = field(default_factory=list)

    @property
    def n_jumps(self) -> int:
        return len(self.jumps)

    @property
    def final_state(self) -> np.ndarray:
        return self.segments[-1].xs[-1]

    @property
    def final_time(self) -> float:
        return float(self.segments[-1].ts[-1])

    @property
    def final_jump_counter(self) -> int:
        return self.segments[-1].j

    @property
    def total_samples(self) -> int:
        return sum(len(seg.ts) for seg in self.segments)

    def iter_samples(self) -> Iterator[tuple[float, int, np.ndarray]]:
        """Yield (t, j, state) over all segments in hybrid-time order."""
        for seg in self.segments:
            for k in range(len(seg.ts)):
                yield float(seg.ts[k]), seg.j, seg.xs[k]


def _require_finite(x: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(x)):
        raise NonFiniteState(f"{what} is not finite: {x!r}")


def _rk4(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: float) -> np.ndarray:
    k1 = f(x)
    k2 = f(x + (0.5 * h) * k1)
    k3 = f(x + (0.5 * h) * k2)
    k4 = f(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_flow(spec: HybridSystemSpec, x: np.ndarray, h: float) -> np.ndarray:
    """One explicit RK4 step of size h along the flow map."""
    if not (h > 0.0 and np.isfinite(h)):
        raise ValueError(f"step size must be positive and finite, got {h}")
    x = np.asarray(x, dtype=float)
    out = _rk4(spec.flow_map, x, h)
    _require_finite(out, f"flow step output (h={h:g})")
    return out


def locate_boundary(spec: HybridSystemSpec, x_inside: np.ndarray, h: float,
                    indicator: Callable[[np.ndarray], float],
                    event_tol: float = 1e-10,
                    max_iter: int = 200) -> tuple[np.ndarray, float]:
    """Find the boundary crossing of ``indicator`` within one flow step.

    Bisects the step fraction in [0, 1], re-integrating the partial RK4 step
    from ``x_inside`` at each probe, until the indicator magnitude at the
    probe state is within ``event_tol``.  The endpoints must straddle the
    zero level set, otherwise NoSignChange is raised.  Returns the boundary
    state and the located fraction.
    """
    x_inside = np.asarray(x_inside, dtype=float)
    f_lo = float(indicator(x_inside))
    if abs(f_lo) <= event_tol:
        return x_inside.copy(), 0.0
    x_hi = step_flow(spec, x_inside, h)
    f_hi = float(indicator(x_hi))
    if abs(f_hi) <= event_tol:
        return x_hi, 1.0
    if f_lo * f_hi > 0.0:
        raise NoSignChange(
            f"indicator does not change sign over the step: {f_lo:.6g} -> {f_hi:.6g}")
    lo, hi = 0.0, 1.0
    x_mid = x_hi
    mid = 1.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        x_mid = step_flow(spec, x_inside, mid * h)
        f_mid = float(indicator(x_mid))
        if abs(f_mid) <= event_tol or (hi - lo) < 1e-16:
            return x_mid, mid
        if (f_mid > 0.0) == (f_hi > 0.0):
            hi = mid
        else:
            lo = mid
    return x_mid, mid


def _select_jump(spec: HybridSystemSpec, x: np.ndarray,
                 event_tol: float) -> tuple[np.ndarray, int]:
    ji = float(spec.in_jump_set(x))
    if ji > event_tol:
        raise NotInJumpSet(
            f"jump requested outside the jump set (indicator {ji:.6g} > {event_tol:g})")
    candidates = spec.jump_map(x)
    if len(candidates) == 0:
        raise EmptyJumpSet(f"jump map returned no candidates at {x!r}")
    post = np.asarray(candidates[0], dtype=float)
    if post.size != spec.dim:
        raise DimensionMismatch(
            f"jump candidate has dimension {post.size}, expected {spec.dim}")
    _require_finite(post, "jump output")
    return post, len(candidates)


def apply_jump(spec: HybridSystemSpec, x: np.ndarray,
               event_tol: float = 1e-10) -> np.ndarray:
    """Apply the jump map at x, returning the selected post-state."""
    post, _ = _select_jump(spec, np.asarray(x, dtype=float), event_tol)
    return post


def simulate(spec: HybridSystemSpec, x0: np.ndarray, cfg: SimConfig) -> HybridArc:
    """Integrate the hybrid system from x0 over hybrid time.

    The run ends when flow time reaches ``cfg.t_max``, when one more jump
    would exceed ``cfg.j_max``, or at a dead end where the state can neither
    flow (the flow field exits the flow set immediately) nor jump.  All three
    are normal terminations, recorded on the arc.  A state outside both sets
    raises CoverageViolation.
    """
    x = np.array(x0, dtype=float).ravel()
    if x.size != spec.dim:
        raise DimensionMismatch(f"x0 has dimension {x.size}, expected {spec.dim}")
    _require_finite(x, "initial state")
    tol = cfg.event_tol

    fi = float(spec.in_flow_set(x))
    ji = float(spec.in_jump_set(x))
    if fi > tol and ji > tol:
        raise CoverageViolation(
            f"initial state is in neither set (flow {fi:.6g}, jump {ji:.6g})")

    t = 0.0
    j = 0
    segments: list[FlowSegment] = []
    jumps: list[JumpEvent] = []
    notes: list[str] = []
    seg_t = [t]
    seg_x = [x.copy()]
    n_clamped = 0
    consecutive_jumps = 0
    zeno_warned = False
    flow_blocked = False
    termination = TERM_T_MAX

    def close_segment() -> None:
        segments.append(FlowSegment(j=j, ts=np.array(seg_t), xs=np.array(seg_x)))

    while True:
        ji = float(spec.in_jump_set(x))
        jump_now = False
        if ji <= tol:
            if cfg.priority is Priority.JUMP:
                jump_now = True
            else:
                jump_now = float(spec.in_flow_set(x)) > tol or flow_blocked

        if jump_now:
            if j >= cfg.j_max:
                termination = TERM_J_MAX
                break
            x_post, n_cand = _select_jump(spec, x, tol)
            jumps.append(JumpEvent(t=t, j_pre=j, x_pre=x.copy(),
                                   x_post=x_post.copy(), n_candidates=n_cand))
            close_segment()
            j += 1
            x = x_post
            seg_t = [t]
            seg_x = [x.copy()]
            flow_blocked = False
            consecutive_jumps += 1
            if consecutive_jumps > ZENO_WARN_AFTER and not zeno_warned:
                msg = (f"{consecutive_jumps} consecutive jumps without flow-time "
                       f"progress at t={t:.6g}; solution may be Zeno")
                warnings.warn(msg, RuntimeWarning, stacklevel=2)
                notes.append(msg)
                zeno_warned = True
            continue
        consecutive_jumps = 0

        fi = float(spec.in_flow_set(x))
        if fi > tol:
            raise CoverageViolation(
                f"state in neither set at t={t:.6g}, j={j} "
                f"(flow {fi:.6g}, jump {ji:.6g})")
        if flow_blocked:
            # On the flow-set boundary with an outward field and no jump
            # available: the solution cannot be continued.
            termination = TERM_DEAD_END
            break
        if t >= cfg.t_max - _PROGRESS_EPS:
            termination = TERM_T_MAX
            break

        h = min(cfg.dt, cfg.t_max - t)
        x_trial = step_flow(spec, x, h)
        fi_trial = float(spec.in_flow_set(x_trial))
        ji_trial = float(spec.in_jump_set(x_trial))

        indicator = None
        if cfg.priority is Priority.JUMP and ji > tol and ji_trial <= -tol:
            # Entered the jump set mid-step: stop at the earliest entry point.
            indicator = spec.in_jump_set
        elif fi_trial > tol:
            # Left the flow set mid-step: stop on its boundary.
            indicator = spec.in_flow_set

        if indicator is None:
            x_new, t_new = x_trial, t + h
        else:
            x_b, frac = locate_boundary(spec, x, h, indicator, tol)
            if frac * h <= _PROGRESS_EPS:
                flow_blocked = True
                continue
            x_new, t_new = x_b, t + frac * h

        if spec.project_flow is not None:
            x_proj = np.asarray(spec.project_flow(x_new), dtype=float)
            if not np.array_equal(x_proj, x_new):
                n_clamped += 1
                x_new = x_proj
        x = x_new
        t = t_new
        seg_t.append(t)
        seg_x.append(x.copy())

    close_segment()
    return HybridArc(segments=segments, jumps=jumps, termination=termination,
                     n_clamped=n_clamped, notes=notes)
