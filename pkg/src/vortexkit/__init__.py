"""Vortex segmentation and Reynolds-family classification on structured flow grids."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    DivergedError, FormatError, LengthError, StencilError, ValidationError, VortexKitError,
)
from .flowgrid import FlowGrid, FlowParams, LabelVolume, ScalarField, load_fgrd, save_fgrd, slice_plane  # noqa: E402

__all__ = [
    "FlowGrid", "FlowParams", "LabelVolume", "ScalarField",
    "load_fgrd", "save_fgrd", "slice_plane",
    "VortexKitError", "ValidationError", "FormatError", "LengthError", "StencilError", "DivergedError",
]
