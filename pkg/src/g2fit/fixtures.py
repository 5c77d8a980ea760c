"""Synthetic ground-truth fixtures shipped with the package.

``theta`` values are unit-scale expected counts per bin; amplitude
parameters (listed under ``amplitudes``) scale linearly with integration
time, the others do not.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import ValidationError
from .models import DelayGrid, ModelSpec, evaluate, pulsed_model, thermal_model
from .sampler import time_scale_for_budget


@dataclass(frozen=True)
class Fixture:
    name: str
    grid: DelayGrid
    spec: ModelSpec
    theta: np.ndarray
    amplitudes: tuple
    unit: str

    def curve(self) -> np.ndarray:
        return evaluate(self.spec, self.theta, self.grid)

    def time_scale(self, photon_budget: float) -> float:
        return time_scale_for_budget(self.curve(), photon_budget)

    def scaled_theta(self, T: float) -> np.ndarray:
        """Ground truth as it would be fitted from a histogram sampled at scale ``T``."""
        out = self.theta.copy()
        for name in self.amplitudes:
            out[self.spec.index(name)] *= T
        return out


def _load_all() -> dict:
    text = resources.files("g2fit").joinpath("data/fixtures.json").read_text()
    return json.loads(text)


def fixture_names() -> list:
    return [k for k in _load_all() if k != "schema_version"]


def load_fixture(name: str) -> Fixture:
    data = _load_all()
    if name not in data or name == "schema_version":
        raise ValidationError(f"unknown fixture {name!r}; available: {fixture_names()}")
    entry = data[name]
    g = entry["grid"]
    grid = DelayGrid.centered(int(g["n_bins"]), float(g["bin_width"]))
    model = entry["model"]
    if model["kind"] == "pulsed":
        spec = pulsed_model(grid, 1.0, n_side_pulses=model.get("n_side_pulses"))
    else:
        spec = thermal_model(grid, 1.0, num_gaussians=int(model.get("num_gaussians", 1)))
    theta = spec.pack(entry["theta"])
    return Fixture(name, grid, spec, theta, tuple(entry["amplitudes"]), g.get("unit", ""))
