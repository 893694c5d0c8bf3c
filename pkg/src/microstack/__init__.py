"""microstack: z-stack microscopy image processing toolkit.

Focus scoring and in/out-of-focus classification, fast-scan deblurring with a
small convolutional restorer, and multi-focus stacking, all on deterministic
float32 pixel data in [0, 1].
"""

from microstack import backend as _backend  # env setup must precede numpy

__version__ = "0.1.0"
