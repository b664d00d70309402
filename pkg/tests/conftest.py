"""Shared fixtures for the platelimit tests"""

import json
from pathlib import Path

import numpy as np
import pytest

from platelimit.fem import SmoothFunction

SAMPLES_DIR = Path(__file__).parent.parent / "samples"


def polynomial(value, gradient, hessian) -> SmoothFunction:
    """SmoothFunction from scalar lambdas of (x, y)."""

    def v(p):
        return np.asarray(value(p[:, 0], p[:, 1]), dtype=float) * np.ones(len(p))

    def g(p):
        gx, gy = gradient(p[:, 0], p[:, 1])
        return np.column_stack((gx * np.ones(len(p)), gy * np.ones(len(p))))

    def h(p):
        hxx, hyy, hxy = hessian(p[:, 0], p[:, 1])
        out = np.empty((len(p), 2, 2))
        out[:, 0, 0] = hxx
        out[:, 1, 1] = hyy
        out[:, 0, 1] = out[:, 1, 0] = hxy
        return out

    return SmoothFunction(v, g, h)


@pytest.fixture
def quarter_config_dict():
    """Coarse simply supported quarter square, Johansen M0 = 1."""
    return {
        "domain": {"type": "rect", "width": 0.5, "height": 0.5},
        "quarter_symmetry": {"enabled": True},
        "element": "p2_lagrange",
        "criterion": {"kind": "johansen", "m0_plus": 1.0, "m0_minus": 1.0},
        "bcs": {"right": "dirichlet", "top": "dirichlet"},
        "mesh": {"nx": 2, "ny": 2, "pattern": "crossed"},
        "outputs": {"json": "result.json", "csv": "convergence.csv", "vtk": "mechanism.vtk", "svg": None},
        "reference_lambda": 24.0,
        "convergence": {"h_list": [0.25, 0.125]},
    }


@pytest.fixture
def quarter_config_file(tmp_path, quarter_config_dict):
    path = tmp_path / "quarter.json"
    path.write_text(json.dumps(quarter_config_dict), encoding="utf-8")
    return path
