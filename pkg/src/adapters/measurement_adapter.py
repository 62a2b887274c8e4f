"""Abstract base class for qubit-ensemble measurement."""

from abc import ABC, abstractmethod

import numpy as np

from src.core.exceptions import ParameterError
from src.core.types import MeasurementRecord, QubitSite


class MeasurementAdapter(ABC):
    """Abstract interface for labeling one qubit from its n-copy ensemble."""

    kind: str = ""

    def __init__(self, n_copies: int):
        if n_copies < 1:
            raise ParameterError(f"n_copies must be >= 1, got {n_copies}")
        self._n_copies = n_copies

    @property
    def n_copies(self) -> int:
        return self._n_copies

    @abstractmethod
    def measure(self, site: QubitSite, rng: np.random.Generator) -> MeasurementRecord:
        """Measure each of the n copies of a qubit once and estimate its label.

        Args:
            site: The qubit to measure (its alpha is the pre-measurement state)
            rng: Seeded generator; the same stream always yields the same record

        Returns:
            MeasurementRecord with readings, post-measurement angles,
            per-copy fidelities, their minimum and the estimated label
        """
        ...
