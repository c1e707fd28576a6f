"""Sub-semi-Riemannian geometry toolkit.

Defines manifolds by a degenerate symmetric cometric field, computes
Christoffel-type tensors and bracket-generation diagnostics, integrates
normal extremals of the associated Hamiltonian system, and analyzes the
exponential map.  Two built-in model groups (a Lorentzian Heisenberg group
and a quaternion H-type group with closed-form extremals) serve as
validation oracles.
"""
from __future__ import annotations

__version__ = "0.1.0"
