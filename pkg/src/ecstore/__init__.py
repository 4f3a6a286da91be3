"""Latency and stall analysis for erasure-coded distributed storage.

Analytic bounds (fork-join, probabilistic scheduling, MDS queues, delayed
relaunch, video streaming), a discrete-event simulator to check them, and an
optimizer for access probabilities.
"""

__version__ = "0.1.0"
