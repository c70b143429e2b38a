"""Wilson-Cowan and local-histogram-equalisation neural fields on the
retinal plane and on the lifted space of positions and orientations."""

from .errors import DegenerateStateError, InvalidParameterError

__version__ = "0.1.0"

__all__ = ["DegenerateStateError", "InvalidParameterError", "__version__"]
