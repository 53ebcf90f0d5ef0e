"""MultiNPE - multi-source neural posterior estimation with attention-based fusion"""

__version__ = "0.3.0"
