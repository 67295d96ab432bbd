"""Two-node phonon quantum network simulator.

Simulates release-and-catch quantum state transfer, remote entanglement,
and dispersive probing between two superconducting qubits connected by a
lossy surface-acoustic-wave delay line with unidirectional transducers,
together with the tomography and fitting pipeline used to analyze such
experiments.
"""

__version__ = "0.1.0"
