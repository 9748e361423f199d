"""torusctrl: bilinear control machinery for fourth-order parabolic PDEs on the torus.

Subpackages cover spectral fields, controlled time integration, the exact
saturation algebra, staged approximate-control synthesis, moment-method null
control of the linearizations, and the local/global exact control pipeline.
"""

__version__ = "0.1.0"
