"""Push the smoothed feedback through one integrator.

For a plant whose physical input is itself a state u (an actuator integrator
udot = v), the tracked feedback kappa_bar becomes a reference that u must
follow.  The composite Lyapunov function adds a weighted following penalty,

    V_b = V_s + (gamma_b / 2) ||u - kappa_bar(x, eta)||^2,

and the new input v = kappa_b combines proportional following, feedforward of
kappa_bar's time derivative, and a Lyapunov cross-term.  The feedforward
needs the x-Jacobians of varsigma and of each column of Upsilon, supplied
analytically through FeedbackJacobians.  The augmented family keeps the
synergistic structure with a gap delta_b <= delta - gamma_s c_kappa.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ParamBoundViolation
from .smoothing import (
    DecomposedFeedback,
    SmoothedParams,
    grad_tracking_lyapunov,
    tracked_feedback,
    tracker_control,
    tracking_lyapunov,
)
from .synergy import AffinePlant, SynergisticQuadruple


@dataclass
class FeedbackJacobians:
    """Analytic x-Jacobians of the decomposed feedback.

    d_varsigma_dx  x -> (m, n)
    d_upsilon_dx   x -> list of s matrices (m, n), one per tracker component,
                   or None when Upsilon is constant in x
    """

    d_varsigma_dx: Callable[[np.ndarray], np.ndarray]
    d_upsilon_dx: Callable[[np.ndarray], list] | None = None


@dataclass(frozen=True)
class BacksteppingParams:
    """Following weight, following gain, and the composite synergy gap."""

    gamma_b: float
    k_b: float
    delta_b: float

    def __post_init__(self):
        for name in ("gamma_b", "k_b", "delta_b"):
            v = getattr(self, name)
            if not (v > 0.0 and np.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v}")


def validate_backstepping_params(q: SynergisticQuadruple, d: DecomposedFeedback,
                                 sp: SmoothedParams, bp: BacksteppingParams) -> None:
    """Check delta_b against the reduced-gap bound; raises ParamBoundViolation."""
    slack = q.delta - sp.gamma_s * d.c_kappa
    if not bp.delta_b <= slack:
        raise ParamBoundViolation(
            f"delta_b = {bp.delta_b:.6g} must be <= delta - gamma_s * c_kappa "
            f"= {slack:.6g}")


def _kappa_bar_jac_x(d: DecomposedFeedback, jac: FeedbackJacobians,
                     x: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """x-Jacobian of kappa_bar: d varsigma + sum_i eta_i d Upsilon_i."""
    out = np.array(jac.d_varsigma_dx(x), dtype=float, copy=True)
    if jac.d_upsilon_dx is not None:
        cols = jac.d_upsilon_dx(x)
        for i, dcol in enumerate(cols):
            out += eta[i] * np.asarray(dcol, dtype=float)
    return out


def reference_time_derivative(plant: AffinePlant, q: SynergisticQuadruple,
                              d: DecomposedFeedback, sp: SmoothedParams,
                              jac: FeedbackJacobians, x: np.ndarray,
                              eta: np.ndarray, u: np.ndarray,
                              theta: np.ndarray) -> np.ndarray:
    """Time derivative of kappa_bar along the composite closed loop.

    etadot is the tracker control and xdot = f + g u with the integrator
    state u as the physical input.
    """
    etadot = tracker_control(plant, q, d, sp, x, eta, theta)
    xdot = (np.asarray(plant.f(x), dtype=float)
            + np.asarray(plant.g(x), dtype=float) @ np.asarray(u, dtype=float))
    return (np.asarray(d.upsilon(x), dtype=float) @ etadot
            + _kappa_bar_jac_x(d, jac, x, eta) @ xdot)


def backstep_lyapunov(q: SynergisticQuadruple, d: DecomposedFeedback,
                      sp: SmoothedParams, bp: BacksteppingParams,
                      x: np.ndarray, eta: np.ndarray, u: np.ndarray,
                      theta: np.ndarray) -> float:
    """Tracking Lyapunov function plus the integrator-following penalty."""
    err = np.asarray(u, float) - tracked_feedback(d, x, eta)
    return (tracking_lyapunov(q, d, sp, x, eta, theta)
            + 0.5 * bp.gamma_b * float(err @ err))


def backstep_control(plant: AffinePlant, q: SynergisticQuadruple,
                     d: DecomposedFeedback, sp: SmoothedParams,
                     bp: BacksteppingParams, jac: FeedbackJacobians,
                     x: np.ndarray, eta: np.ndarray, u: np.ndarray,
                     theta: np.ndarray) -> np.ndarray:
    """Integrator input: following + feedforward + Lyapunov cross-term."""
    err = np.asarray(u, float) - tracked_feedback(d, x, eta)
    gx, _ = q.grad_V(x, theta)
    cross = np.asarray(plant.g(x), float).T @ np.asarray(gx, float).ravel()
    return (-bp.k_b * err
            + reference_time_derivative(plant, q, d, sp, jac, x, eta, u, theta)
            - cross / bp.gamma_b)


def backstepped_quadruple(plant: AffinePlant, q: SynergisticQuadruple,
                          d: DecomposedFeedback, sp: SmoothedParams,
                          bp: BacksteppingParams, jac: FeedbackJacobians,
                          ) -> tuple[AffinePlant, SynergisticQuadruple]:
    """Augment with tracker and integrator states; rebuild the quadruple.

    Returns (plant_b, q_b) over xb = [x | eta | u].  The drift carries the
    physical flow xdot = f + g u, the tracker flow etadot = kappa_s (which
    reads theta, so the composite plant is marked drift_uses_theta), and a
    held integrator; the new input channel drives u.  Compose with
    assemble_closed_loop to simulate.  Raises ParamBoundViolation when
    delta_b violates its bound.
    """
    validate_backstepping_params(q, d, sp, bp)
    n = plant.dim_x
    s = d.dim_tracker
    m = plant.dim_u
    eye_m = np.eye(m)

    def f_b(xb: np.ndarray, theta: np.ndarray) -> np.ndarray:
        x = xb[:n]
        eta = xb[n:n + s]
        u = xb[n + s:]
        xdot = (np.asarray(plant.f(x), dtype=float)
                + np.asarray(plant.g(x), dtype=float) @ u)
        etadot = tracker_control(plant, q, d, sp, x, eta, theta)
        return np.concatenate([xdot, etadot, np.zeros(m)])

    def g_b(xb: np.ndarray) -> np.ndarray:
        out = np.zeros((n + s + m, m))
        out[n + s:, :] = eye_m
        return out

    safety = None
    if plant.safety_indicator is not None:
        parent_safety = plant.safety_indicator

        def safety(xb: np.ndarray) -> float:
            return parent_safety(xb[:n])

    def V_b(xb: np.ndarray, theta: np.ndarray) -> float:
        return backstep_lyapunov(q, d, sp, bp, xb[:n], xb[n:n + s],
                                 xb[n + s:], theta)

    def grad_V_b(xb: np.ndarray, theta: np.ndarray):
        x = xb[:n]
        eta = xb[n:n + s]
        u = xb[n + s:]
        gx, geta, gth = grad_tracking_lyapunov(q, d, sp, x, eta, theta)
        err = np.asarray(u, float) - tracked_feedback(d, x, eta)
        gx = gx - bp.gamma_b * (_kappa_bar_jac_x(d, jac, x, eta).T @ err)
        geta = geta - bp.gamma_b * (np.asarray(d.upsilon(x), float).T @ err)
        gu = bp.gamma_b * err
        return np.concatenate([gx, geta, gu]), gth

    def kappa_b(xb: np.ndarray, theta: np.ndarray) -> np.ndarray:
        return backstep_control(plant, q, d, sp, bp, jac, xb[:n],
                                xb[n:n + s], xb[n + s:], theta)

    def varpi_b(xb: np.ndarray, theta: np.ndarray) -> np.ndarray:
        return q.varpi(xb[:n], theta)

    plant_b = AffinePlant(dim_x=n + s + m, dim_u=m, f=f_b, g=g_b,
                          safety_indicator=safety, drift_uses_theta=True)
    q_b = SynergisticQuadruple(V=V_b, grad_V=grad_V_b, kappa=kappa_b,
                               varpi=varpi_b, Theta=q.Theta.copy(),
                               delta=bp.delta_b)
    return plant_b, q_b


def toy_scalar_pieces(delta: float = 0.1, gamma_s: float = 0.5,
                      k_eta: float = 5.0, delta_s: float = 0.1,
                      gamma_b: float = 0.5, k_b: float = 4.0,
                      delta_b: float = 0.1):
    """A one-dimensional worked example with every piece written out.

    Plant xdot = u, feedback kappa = -x decomposed as varsigma = -x with a
    zero mixing matrix, so the tracker is inert and the integrator reference
    is kappa_bar = -x.  Handy for validating the composite formulas against
    finite differences.  Returns (plant, q, d, sp, bp, jac).
    """
    plant = AffinePlant(
        dim_x=1, dim_u=1,
        f=lambda x: np.zeros(1),
        g=lambda x: np.eye(1),
    )
    q = SynergisticQuadruple(
        V=lambda x, th: 0.5 * float(x[0] * x[0]),
        grad_V=lambda x, th: (np.array([x[0]]), np.zeros(1)),
        kappa=lambda x, th: np.array([-x[0]]),
        varpi=lambda x, th: np.zeros(1),
        Theta=np.array([[0.0]]),
        delta=delta,
    )
    d = DecomposedFeedback(
        sigma=lambda x, th: np.zeros(1),
        varsigma=lambda x: np.array([-x[0]]),
        upsilon=lambda x: np.zeros((1, 1)),
        dim_tracker=1,
        c_kappa=0.0,
        d_sigma_dx=lambda x, th: np.zeros((1, 1)),
        d_sigma_dtheta=lambda x, th: np.zeros((1, 1)),
    )
    sp = SmoothedParams(gamma_s=gamma_s, k_eta=k_eta, delta_s=delta_s)
    bp = BacksteppingParams(gamma_b=gamma_b, k_b=k_b, delta_b=delta_b)
    jac = FeedbackJacobians(
        d_varsigma_dx=lambda x: np.array([[-1.0]]),
        d_upsilon_dx=None,
    )
    return plant, q, d, sp, bp, jac
