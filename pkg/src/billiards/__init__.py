"""Billiards in ellipsoids: confocal geometry, frequencies, and Pell-type
polynomial certificates for periodic and weakly periodic trajectories."""

from mpmath import mp

from .polynomials import DEFAULT_PRECISION_BITS

# Package-wide precision floor.  Heavy numerical entry points raise their
# own working precision locally, but intermediate polynomial arithmetic in
# user code would silently round at mpmath's 53-bit default otherwise.
# Only ever raises, never clobbers a higher ambient setting.
if mp.prec < DEFAULT_PRECISION_BITS:
    mp.prec = DEFAULT_PRECISION_BITS

__version__ = "0.1.0"
