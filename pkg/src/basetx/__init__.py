"""Few-shot classification engine built around base-adapted prototypes."""

__version__ = "0.1.0"
