"""Shared builders for the test suite: charts, rotations, analytic fields."""

import numpy as np
import pytest

import vkshell as vk
from vkshell import geometry as geo


def random_rotation(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def rotated_cylinder(R, grid, radius=1.0, height=1.0):
    """Unit-type cylinder chart rigidly rotated through analytic callables."""
    R = np.asarray(R, float)

    def wrap(f):
        return lambda S, T: np.einsum("cd,xyd->xyc", R, f(S, T))

    pf = wrap(lambda S, T: np.stack(
        [radius * np.cos(T), radius * np.sin(T), S], axis=-1))
    d1f = wrap(lambda S, T: np.stack(
        [0 * S, 0 * S, np.ones_like(S)], axis=-1))
    d2f = wrap(lambda S, T: np.stack(
        [-radius * np.sin(T), radius * np.cos(T), 0 * S], axis=-1))
    zero = lambda S, T: np.zeros(S.shape + (3,))
    d22f = wrap(lambda S, T: np.stack(
        [-radius * np.cos(T), -radius * np.sin(T), 0 * S], axis=-1))
    return vk.build_chart("custom", {
        "position": pf, "d1": d1f, "d2": d2f, "d11": zero, "d12": zero,
        "d22": d22f, "domain": ((0.0, height), (0.0, 2 * np.pi)),
        "periodic2": True}, grid)


def rotated_plate(R, grid):
    R = np.asarray(R, float)

    def wrap(f):
        return lambda U, V: np.einsum("cd,xyd->xyc", R, f(U, V))

    pf = wrap(lambda U, V: np.stack([U, V, np.zeros_like(U)], axis=-1))
    d1f = wrap(lambda U, V: np.stack(
        [np.ones_like(U), 0 * U, 0 * U], axis=-1))
    d2f = wrap(lambda U, V: np.stack(
        [0 * U, np.ones_like(U), 0 * U], axis=-1))
    zero = lambda U, V: np.zeros(U.shape + (3,))
    return vk.build_chart("custom", {
        "position": pf, "d1": d1f, "d2": d2f, "d11": zero, "d12": zero,
        "d22": zero, "domain": ((0.0, 1.0), (0.0, 1.0))}, grid)


def revolution_form_and_field(chart, a_funcs, b_funcs, c_funcs):
    """Assemble the strain form of w = a gamma + b gamma' + c e3 from
    analytic frame components (f, df/ds, df/dtheta) and return (B, w)."""
    S, T = np.meshgrid(chart.u1, chart.u2, indexing="ij")
    g = chart.profile["g"](S)
    gp = chart.profile["gp"](S)
    a, a_s, a_t = (f(S, T) for f in a_funcs)
    b, b_s, b_t = (f(S, T) for f in b_funcs)
    c, c_s, c_t = (f(S, T) for f in c_funcs)
    B11 = gp * a_s + c_s
    B22 = g * (a + b_t)
    B12 = 0.5 * (gp * (a_t - b) + g * b_s + c_t)
    coeff = np.stack([np.stack([B11, B12], -1), np.stack([B12, B22], -1)], -2)
    gamma = np.stack([np.cos(T), np.sin(T), np.zeros_like(T)], -1)
    gammap = np.stack([-np.sin(T), np.cos(T), np.zeros_like(T)], -1)
    w = (a[..., None] * gamma + b[..., None] * gammap
         + c[..., None] * np.array([0.0, 0.0, 1.0]))
    return geo.FormField2(coeff), geo.VectorField3(w)


BANDLIMITED_ABC = (
    (lambda S, T: (0.3 + 0.2 * S**2) * np.cos(2 * T),
     lambda S, T: 0.4 * S * np.cos(2 * T),
     lambda S, T: -2 * (0.3 + 0.2 * S**2) * np.sin(2 * T)),
    (lambda S, T: 0.1 * S * np.sin(3 * T),
     lambda S, T: 0.1 * np.sin(3 * T),
     lambda S, T: 0.3 * S * np.cos(3 * T)),
    (lambda S, T: 0.2 * S**2 + 0.1 * np.cos(T),
     lambda S, T: 0.4 * S,
     lambda S, T: -0.1 * np.sin(T)),
)


@pytest.fixture(scope="session")
def plate16():
    return vk.build_chart("plate", {}, (16, 16))


@pytest.fixture(scope="session")
def plate32():
    return vk.build_chart("plate", {}, (32, 32))


@pytest.fixture(scope="session")
def plate64():
    return vk.build_chart("plate", {}, (64, 64))


@pytest.fixture(scope="session")
def cyl_small():
    return vk.build_chart("cylinder", {"radius": 1.0, "height": 1.0}, (12, 32))


@pytest.fixture(scope="session")
def cyl_mid():
    return vk.build_chart("cylinder", {"radius": 1.0, "height": 1.0}, (24, 48))


def plate_sine_mode(chart):
    U1, U2 = np.meshgrid(chart.u1, chart.u2, indexing="ij")
    vals = np.zeros(chart.shape + (3,))
    vals[..., 2] = np.sin(np.pi * U1) * np.sin(np.pi * U2)
    return geo.VectorField3(vals)
