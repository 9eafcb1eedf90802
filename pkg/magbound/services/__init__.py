"""
Bounds, solvers, searches and the sweep driver.
"""
