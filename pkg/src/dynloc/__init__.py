"""Dynamical localisation of cold atoms in a lattice shaken by elliptic waveforms."""

__version__ = "0.1.0"

from .elliptic import EllipticParameter, complete_K, sn_cn_dn
from .forcing import (PhysicalParams, ScaledParams, Waveform, force, impulse_closed_form,
                      impulse_quadrature, normalization, normalized_impulse, scale_physical)
