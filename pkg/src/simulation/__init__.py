"""
Simulation designs, Monte-Carlo harness and theoretical calculators
"""
