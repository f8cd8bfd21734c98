"""Online learning, adversaries, and Bell-sampling shadow estimation for
quantum channels and multi-time processes at desk scale (1-4 qubits)."""

__version__ = "0.1.0"
