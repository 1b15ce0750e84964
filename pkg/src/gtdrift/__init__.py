"""Fixed-time correlation kernels and simulators for the drifted GUE minor process."""
from .kernel_ct import DriftSpec, GTPattern, KernelPoint, correlation, kernel, one_point
from .kernel_dt import DiscretePoint, RateSpec, kernel_d, rescaled_kernel

__version__ = "0.1.0"

__all__ = [
    "DriftSpec", "GTPattern", "KernelPoint", "correlation", "kernel", "one_point",
    "DiscretePoint", "RateSpec", "kernel_d", "rescaled_kernel",
]
