"""
Numerical kernels: curve geometry, Biot-Savart fields, exterior Neumann solver,
added-mass coefficients and the body dynamics.
"""
