"""Pseudospectral Dirac-Klein-Gordon simulator and verification suite.

The package splits into:

- :mod:`dkg.algebra`        exact 4x4 Dirac/Pauli matrix algebra and projector symbols
- :mod:`dkg.grid`           periodic-box discretization, FFTs, Fourier multipliers
- :mod:`dkg.decomposition`  dyadic shells, cubes, spherical caps, modulation cutoffs
- :mod:`dkg.resonance`      resonance function, lower-bound certification, support checks
- :mod:`dkg.solver`         first-order evolution, reference solver, Picard, scattering
- :mod:`dkg.estimates`      space-time norms, kernel decay, trilinear harness
- :mod:`dkg.cli`            command-line entry point
"""

__version__ = "0.1.0"

from .grid import FrequencyLattice, MassParams, ScalarField, SpinorField

__all__ = [
    "FrequencyLattice",
    "MassParams",
    "ScalarField",
    "SpinorField",
    "__version__",
]
