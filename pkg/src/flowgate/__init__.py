"""Fluid SDN data-plane simulator with proactive bottleneck rerouting and
Bayesian flow admission."""

__version__ = "0.1.0"
