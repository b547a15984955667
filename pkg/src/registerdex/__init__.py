"""registerdex: flexible-grained document search over hierarchical per-paper registers."""

__version__ = "0.1.0"
