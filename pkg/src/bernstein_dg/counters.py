"""Operation counters used for hardware-independent complexity checks.

Kernels accept an optional ``counter`` argument and add their multiply-add
counts to it.  Counters are caller-owned, so concurrent calls stay safe as
long as each thread passes its own.
"""

from __future__ import annotations

from dataclasses import dataclass, fields


@dataclass
class OpCounter:
    """Multiply-add tallies, split by kind of work.

    ``elev_forward`` counts transposed elevations applied while inverting the
    unit lower block factor; ``elev_backward`` the forward elevations of the
    transposed sweep.  ``base_solve`` charges ``m(m + 1)`` per dense pair of
    triangular solves of size ``m``.
    """

    elevate: int = 0
    elev_forward: int = 0
    elev_backward: int = 0
    axpy: int = 0
    scaling: int = 0
    base_solve: int = 0
    sumfact: int = 0
    pointwise: int = 0

    @property
    def elevations(self) -> int:
        return self.elevate + self.elev_forward + self.elev_backward

    @property
    def total(self) -> int:
        return sum(getattr(self, f.name) for f in fields(self))

    def reset(self) -> None:
        for f in fields(self):
            setattr(self, f.name, 0)

    def as_dict(self) -> dict[str, int]:
        return {f.name: getattr(self, f.name) for f in fields(self)}
