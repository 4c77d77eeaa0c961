"""
asymcc

Correlation clustering with asymmetric classification errors: metric LP,
pivot rounding, triangle-based certification, optimal rounding functions,
instance generators and an exact oracle.
"""

__version__ = "0.1.0"
