"""Named analytic displacement modes and load fields for tests and the CLI."""

import numpy as np

from .geometry import VectorField3


def plate_bending_mode(chart):
    """Out-of-plane sine bump on the plate's parameter rectangle."""
    (a1, b1), (a2, b2) = chart.domain
    U1, U2 = np.meshgrid(chart.u1, chart.u2, indexing="ij")
    v3 = np.sin(np.pi * (U1 - a1) / (b1 - a1)) * np.sin(np.pi * (U2 - a2) / (b2 - a2))
    vals = np.zeros(chart.shape + (3,))
    vals[..., 2] = v3
    return VectorField3(vals)


def cylinder_inextensional_mode(chart, k=2):
    """Classical inextensional mode of a radius-1 cylinder.

    Radial amplitude cos(k theta), circumferential -1/k sin(k theta); an
    exact infinitesimal isometry of the unit cylinder.
    """
    if k < 2:
        raise ValueError("inextensional modes need k >= 2")
    theta = chart.u2
    gamma = np.stack([np.cos(theta), np.sin(theta), np.zeros_like(theta)], axis=-1)
    gammap = np.stack([-np.sin(theta), np.cos(theta), np.zeros_like(theta)], axis=-1)
    vr = np.cos(k * theta)
    vt = -np.sin(k * theta) / k
    vals = (vr[None, :, None] * gamma[None, :, :]
            + vt[None, :, None] * gammap[None, :, :])
    vals = np.broadcast_to(vals, chart.shape + (3,)).copy()
    return VectorField3(vals)


MODE_PRESETS = {
    "plate_bending": plate_bending_mode,
    "cylinder_ovalization": lambda chart: cylinder_inextensional_mode(chart, 2),
    "cylinder_k3": lambda chart: cylinder_inextensional_mode(chart, 3),
}


def load_preset(chart, name):
    """Named nodal load fields; callers normally remove the mean."""
    U1, U2 = np.meshgrid(chart.u1, chart.u2, indexing="ij")
    (a1, b1), _ = chart.domain
    vals = np.zeros(chart.shape + (3,))
    if name == "normal_linear1":
        vals[..., 2] = U1 - 0.5 * (a1 + b1)
    elif name == "normal_saddle":
        (a1, b1), (a2, b2) = chart.domain
        vals[..., 2] = (U1 - 0.5 * (a1 + b1)) * (U2 - 0.5 * (a2 + b2))
    elif name == "normal_sine":
        (a1, b1), (a2, b2) = chart.domain
        vals[..., 2] = np.sin(2 * np.pi * (U1 - a1) / (b1 - a1)) \
            * np.sin(2 * np.pi * (U2 - a2) / (b2 - a2))
    elif name == "radial_cos2":
        vals[:] = np.cos(2 * U2)[..., None] * chart.normal
    elif name == "axial_shear":
        vals[..., 2] = np.cos(2 * U2)
    else:
        raise KeyError("unknown load preset %r" % (name,))
    return vals
