"""Built-in right discrete Hamiltonians with analytic partials.

Each factory takes the time step ``h`` and returns the type-two generating
function ``H(q, p') = q.p' + h H_c(q, p')`` of the symplectic Euler scheme for a
continuous Hamiltonian ``H_c``.  Every one of them satisfies the
partial-agreement invariant of :class:`~discretehj.core.DiscreteHamiltonianRight`.
"""

from __future__ import annotations

import numpy as np

from .core import DiscreteHamiltonianRight

__all__ = ["BUILTIN_HAMILTONIANS", "builtin_hamiltonian", "free_particle",
           "harmonic_oscillator", "pendulum", "henon_heiles", "nonseparable"]


def free_particle(h=1.0):
    """``H(q, p') = q.p' + h|p'|^2/2``; the discrete map is a shear."""
    return DiscreteHamiltonianRight(
        lambda q, p: float(q @ p + 0.5 * h * p @ p),
        d1=lambda q, p: p.copy(),
        d2=lambda q, p: q + h * p,
    )


def harmonic_oscillator(h=0.1, omega=1.0):
    w2 = omega * omega
    return DiscreteHamiltonianRight(
        lambda q, p: float(q @ p + h * (0.5 * p @ p + 0.5 * w2 * q @ q)),
        d1=lambda q, p: p + h * w2 * q,
        d2=lambda q, p: q + h * p,
    )


def pendulum(h=0.1):
    return DiscreteHamiltonianRight(
        lambda q, p: float(q @ p + h * (0.5 * p @ p - np.sum(np.cos(q)))),
        d1=lambda q, p: p + h * np.sin(q),
        d2=lambda q, p: q + h * p,
    )


def henon_heiles(h=0.1):
    """Two degrees of freedom, cubic potential."""
    def potential(q):
        x, y = q
        return 0.5 * (x * x + y * y) + x * x * y - y ** 3 / 3.0

    def grad(q):
        x, y = q
        return np.array([x + 2.0 * x * y, y + x * x - y * y])

    return DiscreteHamiltonianRight(
        lambda q, p: float(q @ p + h * (0.5 * p @ p + potential(q))),
        d1=lambda q, p: p + h * grad(q),
        d2=lambda q, p: q + h * p,
    )


def nonseparable(h=0.1):
    """``H_c = (1 + q^2) p^2 / 2 + q^2 / 2``; the momentum update is implicit."""
    return DiscreteHamiltonianRight(
        lambda q, p: float(q @ p + h * np.sum(0.5 * (1 + q * q) * p * p + 0.5 * q * q)),
        d1=lambda q, p: p + h * (q * p * p + q),
        d2=lambda q, p: q + h * (1 + q * q) * p,
    )


BUILTIN_HAMILTONIANS = {
    "free_particle": (free_particle, 1),
    "harmonic_oscillator": (harmonic_oscillator, 1),
    "pendulum": (pendulum, 1),
    "henon_heiles": (henon_heiles, 2),
    "nonseparable": (nonseparable, 1),
}


def builtin_hamiltonian(name, h=0.1):
    """Return ``(H, n)`` for a registered built-in system."""
    try:
        factory, n = BUILTIN_HAMILTONIANS[name]
    except KeyError:
        raise ValueError(f"unknown built-in Hamiltonian {name!r}; "
                         f"choose from {sorted(BUILTIN_HAMILTONIANS)}") from None
    return factory(h), n
