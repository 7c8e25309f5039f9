"""
Simplicity lab: mapping enumeration, grammar coding length and learning-speed sweeps
"""

__version__ = "0.1.0"
