"""Continuous-time vehicle models and their discretization into affine modes.

Both models are written as ``dx/dt = Ac x + Bc u + Ec d + Kc`` and turned into
``x+ = A x + B u + E d + K`` either by forward Euler or by an exact
zero-order hold on ``u`` and ``d``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import expm

from .geometry import Polytope
from .systems import AffineMode, AffineSwitchedSystem, ModelError

DISCRETIZATIONS = ("euler", "zoh")


def discretize(Ac, Bc, Ec, Kc, dt: float, method: str = "euler"):
    Ac = np.atleast_2d(np.asarray(Ac, float))
    n = Ac.shape[0]
    Bc = np.asarray(Bc, float).reshape(n, -1)
    Ec = np.asarray(Ec, float).reshape(n, -1)
    Kc = np.asarray(Kc, float).reshape(n, 1)
    if method == "euler":
        return np.eye(n) + dt * Ac, dt * Bc, dt * Ec, (dt * Kc).ravel()
    if method == "zoh":
        G = np.hstack([Bc, Ec, Kc])
        M = np.zeros((n + G.shape[1], n + G.shape[1]))
        M[:n, :n] = Ac
        M[:n, n:] = G
        Md = expm(M * dt)
        A = Md[:n, :n]
        Gd = Md[:n, n:]
        m, p = Bc.shape[1], Ec.shape[1]
        return A, Gd[:, :m], Gd[:, m:m + p], Gd[:, m + p]
    raise ModelError(f"unknown discretization {method!r}; expected one of {DISCRETIZATIONS}")


def cruise_control(params: dict, method: str = "euler") -> AffineSwitchedSystem:
    """Longitudinal speed ``v`` driven by wheel force, one mode per grade range.

    ``dv/dt = -f0/m - f1/m v + F/m - g sin(theta)``. The disturbance of mode
    ``q`` is ``d = g sin(theta)`` for ``theta`` in that mode's grade range
    (degrees).
    """
    m = float(params["m"])
    f0 = float(params["f0"])
    f1 = float(params["f1"])
    g = float(params["g"])
    dt = float(params.get("dt", 0.1))
    A, B, E, K = discretize([[-f1 / m]], [[1.0 / m]], [[-1.0]], [-f0 / m], dt, method)
    modes = {}
    for key, (lo, hi) in params["grades_deg"].items():
        d_lo, d_hi = sorted((g * math.sin(math.radians(lo)), g * math.sin(math.radians(hi))))
        modes[int(key)] = AffineMode(A, B, E, K, Polytope.box([d_lo], [d_hi]))
    v_lo, v_hi = params["speed"]
    u_lo, u_hi = (c * m * g for c in params["force_mg"])
    return AffineSwitchedSystem(modes, Polytope.box([v_lo], [v_hi]), Polytope.box([u_lo], [u_hi]))


def lane_keeping(params: dict, method: str = "euler") -> AffineSwitchedSystem:
    """Linearized bicycle model at constant longitudinal speed ``u``.

    State ``(y, v, dpsi, r)``: lateral offset, lateral velocity, yaw-angle
    error and yaw rate. Input: front steering angle. Continuous dynamics::

        dy/dt    = v + u dpsi
        dv/dt    = -(Cf + Cr)/(m u) v + ((b Cr - a Cf)/(m u) - u) r + Cf/m delta
        ddpsi/dt = r - r_d
        dr/dt    = (b Cr - a Cf)/(Iz u) v - (a^2 Cf + b^2 Cr)/(Iz u) r + a Cf/Iz delta

    ``r_d`` (the yaw rate demanded by the road) is the disturbance; mode ``q``
    bounds it to ``params['rd_bands'][q]``. The state domain is the box
    ``|x_k| <= X_bounds[k]``.
    """
    m = float(params["m"])
    Iz = float(params["Iz"])
    a = float(params["a"])
    b = float(params["b"])
    Cf = float(params["Cf"])
    Cr = float(params["Cr"])
    u = float(params["u"])
    dt = float(params.get("dt", 0.1))
    Ac = np.array([
        [0.0, 1.0, u, 0.0],
        [0.0, -(Cf + Cr) / (m * u), 0.0, (b * Cr - a * Cf) / (m * u) - u],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, (b * Cr - a * Cf) / (Iz * u), 0.0, -(a * a * Cf + b * b * Cr) / (Iz * u)],
    ])
    Bc = np.array([[0.0], [Cf / m], [0.0], [a * Cf / Iz]])
    Ec = np.array([[0.0], [0.0], [-1.0], [0.0]])
    A, B, E, K = discretize(Ac, Bc, Ec, np.zeros(4), dt, method)
    modes = {int(q): AffineMode(A, B, E, K, Polytope.box([lo], [hi])) for q, (lo, hi) in params["rd_bands"].items()}
    X_bounds = np.asarray(params["X_bounds"], float)
    X = Polytope.box(-X_bounds, X_bounds)
    s_lo, s_hi = params["steering"]
    return AffineSwitchedSystem(modes, X, Polytope.box([s_lo], [s_hi]))


MODELS = {"cruise": cruise_control, "lane_keeping": lane_keeping}
