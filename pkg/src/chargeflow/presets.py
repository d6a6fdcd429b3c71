"""Canonical small systems used by the examples, tests and the CLI.

The continuum preset places two unit-separated sources with couplings
(1, e^{i pi/4}) and decay constant alpha = 0.1; its asymmetric phase gap
produces a visible ground-state current looping from one source to the
other.  The lattice preset is the smallest chain on which all symmetry,
gauge and jump-process statements are exercised exactly (dimension 45).
"""

import numpy as np

from .lattice import LatticeParams
from .model import ChargeSystem

__all__ = ["figure_system", "lattice_preset", "FIGURE_CHARGES"]

FIGURE_CHARGES = (1.0, np.exp(1j * np.pi / 4))


def figure_system(charges=FIGURE_CHARGES):
    """Two sources at distance 1, m = hbar = 1, E0 = 0.005 (alpha = 0.1)."""
    return ChargeSystem(
        positions=np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]),
        charges=np.asarray(charges, dtype=complex),
        m=1.0,
        E0=0.005,
        hbar=1.0,
    )


def lattice_preset(charges=(1.0, 1j)):
    """Eight sites, truncation n_max = 2, sources at sites 2 and 5 (dim 45)."""
    return LatticeParams(
        L=8,
        a=1.0,
        n_max=2,
        source_sites=(2, 5),
        charges=tuple(charges),
        m=1.0,
        E0=0.5,
        hbar=1.0,
    )
