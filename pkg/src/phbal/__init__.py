"""Structure-preserving balancing, model reduction and LQG controller
synthesis for linear port-Hamiltonian systems."""

__version__ = "0.1.0"
