"""Numerical Riemann-Hilbert machinery for the KdV shock (elliptic) region.

Modules
-------
specfun
    Airy triple, theta series, complex Gauss-Legendre quadrature.
scattering
    Reflection coefficient and chi data: pure-step closed forms and a
    Jost-solution ODE oracle for sampled potentials.
phase
    Phase function g, band edge a(xi), Szego-type function F, local Airy
    coordinate w, Abel map and period data.
contours
    Symmetric truncated contour systems and collocation grids.
cauchy
    Discrete Cauchy boundary operators, the singular integral solver, the
    symmetry operator H, and perturbation-bound diagnostics.
rhp
    Jump matrix builders, theta model solution, Airy parametrix pair,
    off-contour recovery, q extraction, singular-time machinery.
cli
    Command-line pipeline orchestration.
"""

__version__ = "0.1.0"
