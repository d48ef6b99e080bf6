# Contract-guided violation trace simplification
__version__ = "1.0.0"
