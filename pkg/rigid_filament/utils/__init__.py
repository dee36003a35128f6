"""
Utility helpers for the rigid filament simulator.
"""
