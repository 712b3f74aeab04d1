"""EMF-constrained max-min power control for user-centric cell-free massive MIMO."""

from .scenario import SystemConfig
from .pipeline import Snapshot, build_snapshot

__version__ = "0.1.0"

__all__ = ["SystemConfig", "Snapshot", "build_snapshot", "__version__"]
