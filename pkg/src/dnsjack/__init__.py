"""Detection of cryptojacking and malicious domains from passive DNS logs."""
from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
