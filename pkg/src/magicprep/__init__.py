"""Simulation of logical state preparation on the rotated surface code.

Submodules: ``layout`` (code geometry), ``circuit`` (preparation and memory
circuits), ``noise`` (Pauli channels), ``stabsim`` (tableau and frame
simulators), ``detectors`` (detector model and matching decoder),
``faultenum`` (exact first-order coefficients), ``analysis`` (estimators),
``experiment`` (sampling driver) and ``cli``.
"""

__version__ = "0.1.0"
