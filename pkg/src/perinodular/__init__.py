"""Quantification of the pulmonary structures surrounding lung nodules
(pleurae, airways, vessels, arteries, veins) from 3-D label volumes, with
the statistical and classification analysis relating them to malignancy.
"""

__version__ = "0.1.0"

from .grid import Mask, Spacing, SphereVOI, Volume, make_voi, resample_isometric, voi_membership

__all__ = [
    "Mask", "Spacing", "SphereVOI", "Volume",
    "make_voi", "resample_isometric", "voi_membership",
    "__version__",
]
