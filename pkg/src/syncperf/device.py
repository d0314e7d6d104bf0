"""Static device parameters that scale and bound model outputs."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import ValidationError


class Interconnect(Enum):
    PCIE = "pcie"
    NVLINK = "nvlink"
    NONE = "none"


@dataclass(frozen=True)
class DeviceProfile:
    """Per-device constants: SM count, warp size, occupancy caps, clock.

    Other occupancy limiters (registers, shared memory) are encoded by
    lowering ``max_warps_per_sm``; the model itself only sees the cap.
    """

    name: str
    sm_count: int
    warp_size: int
    max_warps_per_sm: int
    max_threads_per_block: int
    clock_mhz: float
    gpu_count: int = 1
    interconnect: Interconnect = Interconnect.NONE

    def __post_init__(self) -> None:
        for field_name in ("sm_count", "warp_size", "max_warps_per_sm",
                           "max_threads_per_block", "gpu_count"):
            if getattr(self, field_name) <= 0:
                raise ValidationError(f"{field_name} must be strictly positive")
        if self.clock_mhz <= 0:
            raise ValidationError("clock_mhz must be strictly positive")
        if self.max_threads_per_block % self.warp_size != 0:
            raise ValidationError("warp_size must divide max_threads_per_block")
        if self.max_warps_per_sm * self.warp_size < self.max_threads_per_block:
            raise ValidationError(
                "max_warps_per_sm * warp_size must cover max_threads_per_block")

    def ns_to_cycles(self, ns: float) -> float:
        return ns * self.clock_mhz * 1e-3

    def cycles_to_ns(self, cycles: float) -> float:
        return cycles / (self.clock_mhz * 1e-3)
