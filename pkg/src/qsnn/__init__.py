"""Quantized spiking neural network laboratory.

Networks are described by a (W, S, T) bit allocation: W-bit weights, S-bit
spike levels, T time steps. The package provides the neuron dynamics and
quantizers, an exact bit-serial GeMM equivalence checker, a bit-budget cost
model (SOPs / S-ACE / NS-ACE), surrogate-gradient training at desk scale,
and a CLI tying it together.
"""

import os as _os

# The thread cap has to be in the environment before numpy first loads its
# BLAS, which is why it sits above every other import in the package.
_threads = _os.environ.get("QSNN_THREADS")
if _threads:
    for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS",
                 "NUMEXPR_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)
del _os, _threads

__version__ = "0.1.0"

from .tensors import Shape, RealTensor, IntTensor, ShapeError  # noqa: E402
from .quantize import QuantScheme, BitPlanes  # noqa: E402
from .neuron import NeuronParams, NeuronState, SpikeTensor  # noqa: E402
from .network import BitAllocation, LayerSpec, NetworkSpec  # noqa: E402
from .costs import CostReport  # noqa: E402

__all__ = [
    "Shape", "RealTensor", "IntTensor", "ShapeError",
    "QuantScheme", "BitPlanes",
    "NeuronParams", "NeuronState", "SpikeTensor",
    "BitAllocation", "LayerSpec", "NetworkSpec",
    "CostReport",
    "__version__",
]
