"""Finite element solver for the Boussinesq equations on an open cavity.

Taylor-Hood P2-P1 flow with P2 temperature, Crank-Nicolson time stepping
with extrapolated convection, and a benchmark that compares open-boundary
conditions (do-nothing / directional do-nothing for velocity, Neumann /
heat-transfer for temperature) against a reference computed on an extended
domain.
"""

__version__ = "0.1.0"
