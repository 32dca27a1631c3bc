"""
dmme - Driven Markovian master equation for an invariant-engineered qubit pair.

Modules:
    algebra    two-qubit operators, density matrices, superoperators
    invariant  Lewis-Riesenfeld invariant coefficients, eigenstates and phases
    controls   inverse-engineered control fields f(t), J(t)
    bath       Ohmic reservoir: transition frequencies, rates, Lamb shift
    dynamics   master equation evolution, steady states, dark states
    config     experiment configuration files
    cli        command-line front end
"""

__version__ = "0.1.0"
