"""
Stochastic Variational Wave Lab - Simulation Package
"""

__version__ = "0.3.0"
