"""Analytic test cases on the unit square.

The velocity of the smooth and rough-pressure cases is the curl of the
stream function ``g(x1) g(x2)`` with ``g(t) = t^2 (t - 1)^2``.
"""
import numpy as np
from numpy.polynomial import Polynomial

from .analysis import AnalyticCase
from .assembly import LoadFunctional

_g = Polynomial([0.0, 0.0, 1.0, -2.0, 1.0])
_g1, _g2, _g3 = _g.deriv(1), _g.deriv(2), _g.deriv(3)

ROUGH_PRESSURE_X = 1.0 / np.pi
P_RIGHT = np.pi / (np.pi - 1.0)
P_LEFT = -np.pi


def velocity(x):
    x1, x2 = x[..., 0], x[..., 1]
    return np.stack([_g(x1) * _g1(x2), -_g1(x1) * _g(x2)], axis=-1)


def velocity_gradient(x):
    x1, x2 = x[..., 0], x[..., 1]
    row1 = np.stack([_g1(x1) * _g1(x2), _g(x1) * _g2(x2)], axis=-1)
    row2 = np.stack([-_g2(x1) * _g(x2), -_g1(x1) * _g1(x2)], axis=-1)
    return np.stack([row1, row2], axis=-2)


def minus_laplacian(x):
    x1, x2 = x[..., 0], x[..., 1]
    lap1 = _g2(x1) * _g1(x2) + _g(x1) * _g3(x2)
    lap2 = -_g3(x1) * _g(x2) - _g1(x1) * _g2(x2)
    return -np.stack([lap1, lap2], axis=-1)


def smooth_pressure(x):
    return (x[..., 0] - 0.5) * (x[..., 1] - 0.5)


def smooth_pressure_gradient(x):
    return np.stack([x[..., 1] - 0.5, x[..., 0] - 0.5], axis=-1)


def rough_pressure(x):
    return np.where(x[..., 0] > ROUGH_PRESSURE_X, P_RIGHT, P_LEFT)


def smooth_case(nu=1.0):
    """Polynomial velocity and pressure ``(x1 - 1/2)(x2 - 1/2)``."""
    load = LoadFunctional(volume=lambda x: nu * minus_laplacian(x) + smooth_pressure_gradient(x))
    return AnalyticCase(load=load, nu=nu, u=velocity, grad_u=velocity_gradient, p=smooth_pressure)


def rough_pressure_case(nu=1.0):
    """Same velocity, pressure jumping across ``x1 = 1/pi``.

    The pressure gradient is a line load of density ``P_RIGHT - P_LEFT``
    in direction ``e_1``.
    """
    load = LoadFunctional(volume=lambda x: nu * minus_laplacian(x),
                          line_x=ROUGH_PRESSURE_X,
                          line_density=lambda x2: np.full_like(x2, P_RIGHT - P_LEFT),
                          line_direction=(1.0, 0.0))
    return AnalyticCase(load=load, nu=nu, u=velocity, grad_u=velocity_gradient, p=rough_pressure,
                        p_cut=ROUGH_PRESSURE_X)


def rough_load_case(nu=1.0):
    """Line load ``int_0^1 x2 v(1/2, x2) . e_2 dx2``; no exact solution."""
    load = LoadFunctional(line_x=0.5, line_density=lambda x2: x2, line_direction=(0.0, 1.0))
    return AnalyticCase(load=load, nu=nu)


def gradient_case(nu=1.0):
    """Load ``grad q`` with ``q = |x - (1/2, 1/2)|^2 / 2 - 1/12``; the exact velocity is zero."""
    def q(x):
        return 0.5 * ((x[..., 0] - 0.5) ** 2 + (x[..., 1] - 0.5) ** 2) - 1.0 / 12.0

    load = LoadFunctional(volume=lambda x: np.stack([x[..., 0] - 0.5, x[..., 1] - 0.5], axis=-1))
    return AnalyticCase(load=load, nu=nu,
                        u=lambda x: np.zeros(x.shape[:-1] + (2,)),
                        grad_u=lambda x: np.zeros(x.shape[:-1] + (2, 2)),
                        p=q)
