from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, List, Sequence

import numpy as np

from magbound.utils.linalg import concurrence

# Inputs within this distance of the unit sphere are renormalized silently.
_RENORMALIZE_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class RealTwoQubitState:
    """r1|00> + r2|01> + r3|10> + r4|11> with real amplitudes."""

    r: np.ndarray

    def __post_init__(self) -> None:
        r = np.asarray(self.r, dtype=float).reshape(-1)
        if r.size != 4 or not np.all(np.isfinite(r)):
            raise ValueError(f"Expected four finite amplitudes, got {self.r}")
        norm = float(np.linalg.norm(r))
        if abs(norm - 1.0) > _RENORMALIZE_TOL:
            raise ValueError(f"Amplitudes are not normalized (norm {norm:.6f})")
        r = r / norm
        r.setflags(write=False)
        object.__setattr__(self, "r", r)

    @classmethod
    def from_unnormalized(cls, values: Sequence[float]) -> "RealTwoQubitState":
        values = np.asarray(values, dtype=float)
        return cls(values / np.linalg.norm(values))

    def __iter__(self) -> Iterator[float]:
        return iter(self.r.tolist())

    @property
    def r14p(self) -> float:
        return float(self.r[0] + self.r[3])

    @property
    def r14m(self) -> float:
        return float(self.r[0] - self.r[3])

    @property
    def r23p(self) -> float:
        return float(self.r[1] + self.r[2])

    @property
    def r23m(self) -> float:
        return float(self.r[1] - self.r[2])

    @property
    def delta(self) -> float:
        r1, r2, r3, r4 = self.r
        return float(1.0 - 2.0 * (r1 * r4 - r2 * r3))

    @property
    def concurrence(self) -> float:
        return concurrence(self.r)

    def ket(self) -> np.ndarray:
        return self.r.astype(complex)


def sample_real_states(n: int, rng: np.random.Generator) -> List[RealTwoQubitState]:
    """Haar-like real states: normalized Gaussian 4-vectors."""
    return [RealTwoQubitState.from_unnormalized(rng.normal(size=4)) for _ in range(n)]
