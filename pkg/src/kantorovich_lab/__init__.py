"""Kantorovich-type seminorms and convergence experiments for signed measures."""

from .measures import (
    PseudometricSpace,
    QuotientMap,
    SignedMeasure,
    barycenter,
    jordan_decompose,
    load_measure,
    pushforward,
    quotient,
    save_measure,
    total_variation,
)
from .transport import (
    Coupling,
    LipschitzWitness,
    brute_force_dual,
    k_norm,
    kernel_backend,
    kq_norm,
    kr_norm,
    wasserstein_q,
)

__version__ = "0.1.0"

__all__ = [
    "PseudometricSpace",
    "SignedMeasure",
    "QuotientMap",
    "Coupling",
    "LipschitzWitness",
    "jordan_decompose",
    "total_variation",
    "quotient",
    "pushforward",
    "barycenter",
    "kr_norm",
    "k_norm",
    "kq_norm",
    "wasserstein_q",
    "brute_force_dual",
    "kernel_backend",
    "load_measure",
    "save_measure",
    "__version__",
]
