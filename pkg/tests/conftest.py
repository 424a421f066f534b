"""Shared fixtures: reference curves and short reusable flow runs."""
from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hexaflow import (
    FlowConfig,
    InitialSpec,
    compute_geometry,
    generate_initial,
    run_flow,
)


@pytest.fixture(scope="session")
def cosine_curve():
    """Standard small cosine graph: A = 0.05, one half-period, n = 128."""
    return generate_initial(
        InitialSpec(kind="cosine-graph", amplitude=0.05, mode=1, n=128)
    )


@pytest.fixture(scope="session")
def cosine_profile(cosine_curve):
    return compute_geometry(cosine_curve)


@pytest.fixture(scope="session")
def flat_curve():
    return generate_initial(InitialSpec(kind="flat", n=128))


@pytest.fixture(scope="session")
def short_run(cosine_curve):
    """A short evolution of the standard cosine used by identity checks."""
    config = FlowConfig(n=128, t_end=0.2, snapshot_every=400)
    return run_flow(config, cosine_curve)


@pytest.fixture(scope="session")
def flat_run(flat_curve):
    """A capped run from the exact fixed point."""
    config = FlowConfig(n=128, t_end=0.01, snapshot_every=100, max_steps=400)
    return run_flow(config, flat_curve)


@pytest.fixture(scope="session")
def u_turn_curve():
    """A curve joining the lines whose tangent turns by pi end to end."""
    import numpy as np
    from hexaflow import DiscreteCurve, resample_uniform

    u = np.linspace(0.0, 1.0, 200001)
    integrand = np.cos(np.pi * u ** 9)
    du = u[1] - u[0]
    gap_per_length = du * (integrand.sum() - 0.5 * (integrand[0] + integrand[-1]))
    length = 2.0 / gap_per_length
    s = u * length
    theta = np.pi * u ** 9
    x = np.empty_like(s)
    y = np.empty_like(s)
    x[0], y[0] = -1.0, 0.0
    np.cumsum(0.5 * (np.cos(theta[1:]) + np.cos(theta[:-1])) * np.diff(s), out=x[1:])
    np.cumsum(0.5 * (np.sin(theta[1:]) + np.sin(theta[:-1])) * np.diff(s), out=y[1:])
    x[1:] -= 1.0
    pts = np.column_stack([x, y])
    pts[-1, 0] = 1.0
    return resample_uniform(DiscreteCurve(pts, -1.0, 1.0), 512)
