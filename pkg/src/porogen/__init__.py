"""porogen: reconstruction and validation of 3D porous-media micro-structures.

Sub-modules
-----------
volume     raw voxel I/O, equalization, Otsu segmentation, sub-domains,
           spanning-pore connectivity
twopoint   two-point probability functions and ensemble statistics
minkowski  Minkowski-functional densities and gray-threshold sweeps
weights    portable binary network-weights format (G3DW)
network    forward inference of the volumetric generator/discriminator pair
stokes     staggered-grid Stokes flow, permeability, velocity histograms
kstest     two-sample Kolmogorov-Smirnov test on binned distributions
report     end-to-end validation pipeline
cli        command-line interface
"""

__version__ = "0.1.0"

from .errors import PorogenError  # noqa: F401
