"""Bridge modal identification from a single moving sensor.

Simulation (closed-form modal responses and coupled vehicle-bridge
interaction), output-only frequency and damping identification, and three
mode-shape estimators: polynomial least squares for known inputs, and
ensemble standard deviation or evolutionary power spectrum for random
traffic.
"""
__version__ = "0.1.0"
