"""Bias-bound records."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BoundResult:
    bound_value: float
    argmax_pair: tuple[np.ndarray, np.ndarray]
    per_pair: bool
    delta: float
    gamma_source: str
    cap_sign: int = 1
    plug_in: bool = False

    def to_dict(self) -> dict[str, object]:
        return {
            "delta": self.delta,
            "gamma_source": self.gamma_source,
            "bound_value": self.bound_value,
            "argmax_pair": [self.argmax_pair[0].tolist(), self.argmax_pair[1].tolist()],
            "per_pair": self.per_pair,
        }
