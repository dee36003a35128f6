"""
Rigid closed filament in a 3D perfect fluid: thick-tube and zero-radius dynamics.
"""

__version__ = "0.1.0"
