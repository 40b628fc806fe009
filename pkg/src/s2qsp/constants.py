"""Numerical tolerance ladder shared by the simulator and the verifiers."""

GATE_TOL = 1e-12        # norm drift allowed per gate application
END_TO_END_TOL = 1e-9   # state/fidelity comparisons after a full run
MEASURE_NORM_TOL = 1e-6  # refuse to measure a state whose norm drifted further
EIG_CLAMP = 1e-10       # eigenvalues below this are treated as zero
MAX_QUBITS = 24
