"""Simulation and worst-case-rate toolkit for intermittent-communication SGD.

Simulates local SGD, minibatch SGD, thumb-twiddling SGD and their accelerated
variants under the (M machines, K steps per round, R rounds) pattern on convex
test problems, evaluates the closed-form worst-case rates they are compared
against, and provides exact-enumeration and Monte Carlo harnesses for checking
the theory at desk scale.
"""

__version__ = "0.1.0"
