"""
Pauli algebra and linear-algebra helpers.
"""
