"""Learning experiments on the universal single-feature circuit.

Simulates the classical stochastic and quantum unitary working channels of
the single-feature circuit, trains gate-adopting preferences with
differential evolution, and reproduces the learning speed comparisons,
dephasing scans, hyperparameter sweeps and multi-bit bank construction.
"""

__version__ = "0.1.0"
