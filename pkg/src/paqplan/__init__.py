"""Budgeted model-search planner.

Finds a high-quality predictive model under a training-iteration budget by
combining search strategies (grid, random, Nelder-Mead, Powell, TPE),
bandit-style early termination of unpromising models, and batched training
that shares scans of the data across several models at once.
"""

__version__ = "0.1.0"
