"""One-shot entropic quantities and remote state preparation at small dimension."""
__version__ = "0.1.0"
