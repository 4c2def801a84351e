"""Resonant cubic systems of Szego type: flows, invariant manifolds and diagnostics."""

__version__ = "0.1.0"

from .kernels import Family, KernelSpec, coupling, linear_term  # noqa: E402
from .state import ModeState, charges  # noqa: E402
from .flow import IntegratorControls, Termination, Trajectory, integrate, rhs_direct, rhs_fast  # noqa: E402
from .manifold import ManifoldState, lift_L1, veff, classify, blowup_family  # noqa: E402

__all__ = [
    "Family", "KernelSpec", "coupling", "linear_term", "ModeState", "charges",
    "IntegratorControls", "Termination", "Trajectory", "integrate", "rhs_direct", "rhs_fast",
    "ManifoldState", "lift_L1", "veff", "classify", "blowup_family",
]
