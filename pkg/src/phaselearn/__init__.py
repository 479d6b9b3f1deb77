"""Phase-transition learning on a statevector simulator.

VQE ground states from a checkerboard ansatz, symmetry augmentation and a
hybrid convolutional/quantum classifier.
"""

__version__ = "0.1.0"

from phaselearn.errors import (
    BoundaryError,
    ConvergenceError,
    DivergenceError,
    DomainError,
    RecordError,
    ShapeError,
    SizeError,
)

__all__ = [
    "BoundaryError",
    "ConvergenceError",
    "DivergenceError",
    "DomainError",
    "RecordError",
    "ShapeError",
    "SizeError",
    "__version__",
]
