"""Labelled scan container shared by the experiments, fitters and file formats."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Axis:
    name: str
    unit: str
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1:
            raise ValueError(f"axis {self.name!r} must be one-dimensional")
        object.__setattr__(self, "values", v)

    def __eq__(self, other):
        return (
            isinstance(other, Axis)
            and self.name == other.name
            and self.unit == other.unit
            and np.array_equal(self.values, other.values)
        )

    @property
    def label(self):
        return f"{self.name} [{self.unit}]"


@dataclass
class ScanResult:
    """Spectrum, 2-D map or time trace.

    ``values`` has shape ``(len(axis1),)`` or ``(len(axis1), len(axis2))``.
    ``uncertainty`` is optional and has the same shape.
    """

    axis1: Axis
    values: np.ndarray
    axis2: Axis | None = None
    value_name: str = "emission"
    value_unit: str = "arb"
    metadata: dict = field(default_factory=dict)
    uncertainty: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        shape = (self.axis1.values.size,) + (() if self.axis2 is None else (self.axis2.values.size,))
        if self.values.shape != shape:
            raise ValueError(f"values shape {self.values.shape} does not match axes {shape}")
        if self.uncertainty is not None:
            self.uncertainty = np.asarray(self.uncertainty, dtype=float)
            if self.uncertainty.shape != shape:
                raise ValueError("uncertainty shape does not match values")

    @property
    def is_map(self):
        return self.axis2 is not None

    def __eq__(self, other):
        if not isinstance(other, ScanResult):
            return NotImplemented
        same_unc = (self.uncertainty is None and other.uncertainty is None) or (
            self.uncertainty is not None
            and other.uncertainty is not None
            and np.array_equal(self.uncertainty, other.uncertainty)
        )
        return (
            self.axis1 == other.axis1
            and self.axis2 == other.axis2
            and self.value_name == other.value_name
            and self.value_unit == other.value_unit
            and np.array_equal(self.values, other.values)
            and self.metadata == other.metadata
            and same_unc
        )
