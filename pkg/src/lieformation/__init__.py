"""Optimal formation trajectories for unicycle-type agents on SE(2).

Modules:

* :mod:`lieformation.se2` exact group and algebra arithmetic with the Cayley retraction
* :mod:`lieformation.formation` formation graphs, barrier potentials and their gradients
* :mod:`lieformation.continuous` reduced necessary conditions and an RK4 reference integrator
* :mod:`lieformation.discrete` the discrete variational integrator
* :mod:`lieformation.bvp` the staged boundary-value solve
* :mod:`lieformation.cli` the command-line front end
"""

from .errors import ChartError, DomainError, LieFormationError, NoConvergence, SingularityError
from .formation import Edge, FormationSpec
from .se2 import GroupElement

__version__ = "0.1.0"

__all__ = [
    "ChartError",
    "DomainError",
    "Edge",
    "FormationSpec",
    "GroupElement",
    "LieFormationError",
    "NoConvergence",
    "SingularityError",
]
