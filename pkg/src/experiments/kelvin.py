"""
Kelvin-wave fields.

Straight coast (the channel y >= 0, coast at y = 0): the travelling wave

    h = exp(-y Fr/Ro) exp(-(x - t/Fr - x0)^2),   u = (h/Fr, 0)

solves the linear equations exactly. It moves in +x at speed 1/Fr with the
coast on its right and decays away from the coast over Ro/Fr.

Circular basin of radius r0 (coast at r = r0):

    h = exp((r - r0) Fr/Ro) cos(theta),   u_theta = h/Fr,   u_r = 0

is in geostrophic balance across the coast but not an exact solution; it
is used as the initial condition of the circular run.
"""

from dataclasses import dataclass

import numpy as np

from src.spaces.function_space import interpolate_scalar, interpolate_vector
from src.operators.assembly import OperatorSet
from src.dynamics.stepper import State


@dataclass(frozen=True)
class ChannelKelvinWave:
    ro: float
    fr: float
    x0: float = -5.0

    @property
    def decay_length(self) -> float:
        return self.ro / self.fr

    def thickness(self, t: float):
        def h(x, y):
            return np.exp(-y / self.decay_length) * np.exp(-(x - t / self.fr - self.x0) ** 2)
        return h

    def velocity(self, t: float):
        h = self.thickness(t)

        def u(x, y):
            return h(x, y) / self.fr, np.zeros_like(np.asarray(x, dtype=float))
        return u

    def state(self, ops: OperatorSet, t: float = 0.0) -> State:
        return State(u=interpolate_vector(ops.v_space, self.velocity(t)),
                     h=interpolate_scalar(ops.s_space, self.thickness(t)), t=t)


@dataclass(frozen=True)
class CircularKelvinWave:
    ro: float
    fr: float
    r0: float = 1.0
    center: tuple[float, float] = (0.0, 0.0)
    amplitude: float = 1.0

    def _polar(self, x, y):
        dx = np.asarray(x, dtype=float) - self.center[0]
        dy = np.asarray(y, dtype=float) - self.center[1]
        return np.hypot(dx, dy), np.arctan2(dy, dx)

    def thickness(self):
        def h(x, y):
            r, theta = self._polar(x, y)
            return self.amplitude * np.exp((r - self.r0) * self.fr / self.ro) * np.cos(theta)
        return h

    def velocity(self):
        h = self.thickness()

        def u(x, y):
            _, theta = self._polar(x, y)
            u_theta = h(x, y) / self.fr
            return -u_theta * np.sin(theta), u_theta * np.cos(theta)
        return u

    def state(self, ops: OperatorSet) -> State:
        return State(u=interpolate_vector(ops.v_space, self.velocity()),
                     h=interpolate_scalar(ops.s_space, self.thickness()), t=0.0)
