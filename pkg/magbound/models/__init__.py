"""
Field encoding, dephasing channels, real two-qubit states and stored optimal inputs.
"""
