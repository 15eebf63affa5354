"""Phase-field simulation of two-phase liquid-crystalline emulsions.

The package couples a Cahn-Hilliard equation for the phase fraction with a
relaxational (Ericksen-Leslie type) equation for the polarization vector,
linked through a quadratic interfacial anchoring energy, on a periodic
rectangular grid.  An optional incompressible flow coupling, a landscape
analyzer for the pointwise energy density, a well-posedness condition
checker and an independent oracle suite are included.

Layout:

- :mod:`lcemul.grid`      periodic grid, fields, discrete operators
- :mod:`lcemul.energy`    potentials, free energy, variational derivatives,
  energy-density landscape
- :mod:`lcemul.analysis`  parameter-condition checks, a-priori bounds,
  interpolation-constant estimators
- :mod:`lcemul.dynamics`  theta-method time stepper with monolithic Newton
- :mod:`lcemul.flow`      incompressible velocity coupling
- :mod:`lcemul.verify`    independent oracles and identity checks
- :mod:`lcemul.io`        config files, snapshots, diagnostics, images
- :mod:`lcemul.cli`       the ``sim`` command line tool
"""

from lcemul.grid import Grid2D, ScalarField, VectorField2
from lcemul.energy import (
    AnchoringForm,
    EnergyBreakdown,
    PhysParams,
    Potential,
    State,
    chemical_potential,
    free_energy,
    molecular_field,
)

__all__ = [
    "AnchoringForm",
    "EnergyBreakdown",
    "Grid2D",
    "PhysParams",
    "Potential",
    "ScalarField",
    "State",
    "VectorField2",
    "chemical_potential",
    "free_energy",
    "molecular_field",
]

__version__ = "0.1.0"
