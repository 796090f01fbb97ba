"""Gate-level statevector simulation of a quantum lattice Boltzmann solver
for 2D incompressible flow in stream-function/vorticity form."""

__version__ = "0.1.0"
