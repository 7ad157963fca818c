"""kinwave: composite-wave stability laboratory for the 1D kinetic gas.

Builds the generic three-wave solution structure (rarefaction, viscous
contact, shock profile with a dynamic shift), the hard-sphere collision
operator machinery, and the weighted relative-entropy diagnostics, and
runs fluid and coarse kinetic simulations that measure them.
"""

__version__ = "0.1.0"

from .gas import FluidTriple, ConservedTriple, TransportLaw  # noqa: F401
from .riemann import (RiemannDecomposition, generate_states,  # noqa: F401
                      solve_riemann)
