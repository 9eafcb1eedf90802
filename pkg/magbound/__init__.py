"""
MagBound: Cramér-Rao-type bounds for two-qubit 3D magnetometry under dephasing.
"""
