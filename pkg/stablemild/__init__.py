"""
Mild solutions of semilinear stochastic equations driven by alpha-stable noise, and Monte Carlo checks of their
tail, moment, continuity and contraction bounds.
"""
