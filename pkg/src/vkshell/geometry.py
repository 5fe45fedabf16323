"""Discrete charts for parametrized mid-surfaces.

A chart caches, per grid node: position, tangents, unit normal, first and
second fundamental forms, shape operator, an orthonormal tangent frame and
quadrature weights.  Built-in families (plate, cylinder, surface of
revolution, sphere patch) use analytic derivatives; custom charts fall
back to finite differences of the supplied samples.

Tangential derivatives of nodal fields use 2nd-order finite differences
along non-periodic axes.  Along a closed (periodic) axis the default is
FFT spectral differentiation, which annihilates bandlimited inextensional
modes exactly; central differences with wraparound are available via
``theta_scheme="central"``.
"""

from dataclasses import dataclass, field

import numpy as np

from . import operators as ops


class ChartError(ValueError):
    """Invalid or degenerate surface parametrization."""


FAMILIES = ("plate", "cylinder", "revolution", "sphere_patch", "custom")


@dataclass
class VectorField3:
    """Per-node 3-vector field (displacement, load, ...)."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 3 or self.values.shape[-1] != 3:
            raise ValueError("VectorField3 expects shape (N1, N2, 3)")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("VectorField3 contains non-finite values")

    @property
    def shape(self):
        return self.values.shape[:2]


@dataclass
class FormField2:
    """Symmetric 2x2 tensor field in chart coordinates, b_ij = t_i . B t_j."""

    coeff: np.ndarray

    def __post_init__(self):
        self.coeff = np.asarray(self.coeff, dtype=float)
        if self.coeff.ndim != 4 or self.coeff.shape[-2:] != (2, 2):
            raise ValueError("FormField2 expects shape (N1, N2, 2, 2)")
        # store exactly symmetric
        self.coeff = 0.5 * (self.coeff + np.swapaxes(self.coeff, -1, -2))

    @property
    def shape(self):
        return self.coeff.shape[:2]


def as_vector_field(obj):
    return obj if isinstance(obj, VectorField3) else VectorField3(np.asarray(obj, float))


def as_form_field(obj):
    return obj if isinstance(obj, FormField2) else FormField2(np.asarray(obj, float))


@dataclass
class SurfaceChart:
    """Discretized parametrized surface with cached geometric data."""

    family: str
    domain: tuple
    shape: tuple
    periodic2: bool
    u1: np.ndarray
    u2: np.ndarray
    pos: np.ndarray          # (N1,N2,3)
    t1: np.ndarray           # d r / d u1
    t2: np.ndarray           # d r / d u2
    normal: np.ndarray
    metric: np.ndarray       # (N1,N2,2,2)
    metric_inv: np.ndarray
    sqrt_g: np.ndarray
    second_form: np.ndarray  # h_ij = (d_i n) . t_j
    shape_op: np.ndarray     # S^i_j = g^{ik} h_kj
    dn1: np.ndarray          # d n / d u1
    dn2: np.ndarray
    frame_e1: np.ndarray
    frame_e2: np.ndarray
    ginv_half: np.ndarray    # G^{-1/2}, symmetric
    quad_w: np.ndarray       # (N1,N2) trapezoid x sqrt(g)
    du: tuple
    theta_scheme: str = "spectral"
    profile: dict = field(default_factory=dict)

    # -- derivative application ------------------------------------------
    def d1(self, f):
        return ops.fd1_apply(f, self.du[0], axis=0)

    def d2(self, f):
        if not self.periodic2:
            return ops.fd1_apply(f, self.du[1], axis=1)
        if self.theta_scheme == "spectral":
            length = self.domain[1][1] - self.domain[1][0]
            return ops.spectral_apply(f, length, axis=1)
        return ops.fd1_periodic_apply(f, self.du[1], axis=1)

    def d1_matrix(self):
        n1 = self.shape[0]
        return ops.fd1_matrix(n1, self.du[0])

    def d2_matrix(self):
        n2 = self.shape[1]
        if not self.periodic2:
            return ops.fd1_matrix(n2, self.du[1])
        if self.theta_scheme == "spectral":
            length = self.domain[1][1] - self.domain[1][0]
            return ops.spectral_matrix(n2, length)
        return ops.fd1_periodic_matrix(n2, self.du[1])

    @property
    def n_nodes(self):
        return self.shape[0] * self.shape[1]

    def lift_dual(self):
        """Tangent covector duals: dual_i = g^{ij} t_j, shape (N1,N2,2,3)."""
        t = np.stack([self.t1, self.t2], axis=2)             # (N1,N2,2,3)
        return np.einsum("xyij,xyjc->xyic", self.metric_inv, t)


# ---------------------------------------------------------------------------
# chart construction
# ---------------------------------------------------------------------------

def _grid(domain, shape, periodic2):
    (a1, b1), (a2, b2) = domain
    n1, n2 = shape
    u1 = np.linspace(a1, b1, n1)
    if periodic2:
        u2 = a2 + (b2 - a2) * np.arange(n2) / n2
        du2 = (b2 - a2) / n2
    else:
        u2 = np.linspace(a2, b2, n2)
        du2 = (b2 - a2) / (n2 - 1)
    du1 = (b1 - a1) / (n1 - 1)
    return u1, u2, (du1, du2)


def _poly_profile(coeffs):
    c = np.asarray(coeffs, dtype=float)
    p = np.polynomial.Polynomial(c)
    return p, p.deriv(1), p.deriv(2)


def build_chart(family, params=None, grid=(32, 32)):
    """Build a SurfaceChart for one of the supported families.

    Parameters
    ----------
    family : str
        One of "plate", "cylinder", "revolution", "sphere_patch", "custom".
    params : dict
        Family parameters.  plate: bounds.  cylinder: radius, height.
        revolution: profile (callable or poly coefficients), s_range.
        sphere_patch: radius, polar_margin.  custom: position (callable or
        (N1,N2,3) array), optional d1/d2/d11/d12/d22 callables, periodic2,
        domain.
    grid : (int, int)
        Node counts per axis; at least 8x8.
    """
    params = dict(params or {})
    n1, n2 = grid
    if n1 < 8 or n2 < 8:
        raise ChartError("grid must be at least 8x8, got %dx%d" % (n1, n2))
    family = family.lower().replace("-", "_")
    if family not in FAMILIES:
        raise ChartError("unknown family %r" % (family,))
    theta_scheme = params.pop("theta_scheme", "spectral")
    if theta_scheme not in ("spectral", "central"):
        raise ChartError("theta_scheme must be 'spectral' or 'central'")

    profile = {}
    if family == "plate":
        (a1, b1), (a2, b2) = params.get("bounds", ((0.0, 1.0), (0.0, 1.0)))
        domain = ((a1, b1), (a2, b2))
        periodic2 = False
        pf = lambda u1, u2: np.stack([u1, u2, np.zeros_like(u1)], axis=-1)
        d1f = lambda u1, u2: np.stack([np.ones_like(u1), np.zeros_like(u1), np.zeros_like(u1)], axis=-1)
        d2f = lambda u1, u2: np.stack([np.zeros_like(u1), np.ones_like(u1), np.zeros_like(u1)], axis=-1)
        zero3 = lambda u1, u2: np.zeros(u1.shape + (3,))
        d11f = d12f = d22f = zero3
    elif family in ("cylinder", "revolution"):
        if family == "cylinder":
            radius = float(params.get("radius", 1.0))
            height = float(params.get("height", 1.0))
            if radius <= 0 or height <= 0:
                raise ChartError("cylinder needs radius > 0 and height > 0")
            s0, s1 = params.get("s_range", (0.0, height))
            g = lambda s: np.full_like(np.asarray(s, float), radius)
            gp = lambda s: np.zeros_like(np.asarray(s, float))
            gpp = gp
        else:
            prof = params.get("profile")
            if prof is None:
                raise ChartError("revolution needs a 'profile'")
            if callable(prof):
                g = prof
                gp = params.get("profile_d1")
                gpp = params.get("profile_d2")
                if gp is None or gpp is None:
                    raise ChartError("callable profile needs profile_d1 and profile_d2")
            else:
                g, gp, gpp = _poly_profile(prof)
            s0, s1 = params.get("s_range", (0.0, 1.0))
        domain = ((s0, s1), (0.0, 2.0 * np.pi))
        periodic2 = True
        profile = {"g": g, "gp": gp, "gpp": gpp}
        gv = np.asarray(g(np.linspace(s0, s1, 64)), float)
        if np.any(gv <= 0):
            raise ChartError("revolution profile must be positive on the s-range")

        def pf(u1, u2):
            r = g(u1)
            return np.stack([r * np.cos(u2), r * np.sin(u2), u1], axis=-1)

        def d1f(u1, u2):
            r = gp(u1)
            return np.stack([r * np.cos(u2), r * np.sin(u2), np.ones_like(u1)], axis=-1)

        def d2f(u1, u2):
            r = g(u1)
            return np.stack([-r * np.sin(u2), r * np.cos(u2), np.zeros_like(u1)], axis=-1)

        def d11f(u1, u2):
            r = gpp(u1)
            return np.stack([r * np.cos(u2), r * np.sin(u2), np.zeros_like(u1)], axis=-1)

        def d12f(u1, u2):
            r = gp(u1)
            return np.stack([-r * np.sin(u2), r * np.cos(u2), np.zeros_like(u1)], axis=-1)

        def d22f(u1, u2):
            r = g(u1)
            return np.stack([-r * np.cos(u2), -r * np.sin(u2), np.zeros_like(u1)], axis=-1)
    elif family == "sphere_patch":
        radius = float(params.get("radius", 1.0))
        if radius <= 0:
            raise ChartError("sphere_patch needs radius > 0")
        margin = float(params.get("polar_margin", 1e-3))
        phi0, phi1 = params.get("polar_range", (margin, np.pi - margin))
        if not (0 < phi0 < phi1 < np.pi):
            raise ChartError("polar range must lie strictly inside (0, pi)")
        domain = ((phi0, phi1), (0.0, 2.0 * np.pi))
        periodic2 = True
        R = radius

        def pf(p, t):
            return R * np.stack([np.sin(p) * np.cos(t), np.sin(p) * np.sin(t), np.cos(p)], axis=-1)

        def d1f(p, t):
            return R * np.stack([np.cos(p) * np.cos(t), np.cos(p) * np.sin(t), -np.sin(p)], axis=-1)

        def d2f(p, t):
            return R * np.stack([-np.sin(p) * np.sin(t), np.sin(p) * np.cos(t), np.zeros_like(p)], axis=-1)

        def d11f(p, t):
            return -pf(p, t)

        def d12f(p, t):
            return R * np.stack([-np.cos(p) * np.sin(t), np.cos(p) * np.cos(t), np.zeros_like(p)], axis=-1)

        def d22f(p, t):
            return R * np.stack([-np.sin(p) * np.cos(t), -np.sin(p) * np.sin(t), np.zeros_like(p)], axis=-1)
    else:  # custom
        position = params.get("position")
        if position is None:
            raise ChartError("custom chart needs 'position'")
        domain = params.get("domain", ((0.0, 1.0), (0.0, 1.0)))
        periodic2 = bool(params.get("periodic2", False))
        pf = position if callable(position) else None
        d1f = params.get("d1")
        d2f = params.get("d2")
        d11f = params.get("d11")
        d12f = params.get("d12")
        d22f = params.get("d22")

    u1, u2, du = _grid(domain, (n1, n2), periodic2)
    U1, U2 = np.meshgrid(u1, u2, indexing="ij")

    if family == "custom" and pf is None:
        pos = np.asarray(params["position"], dtype=float)
        if pos.shape != (n1, n2, 3):
            raise ChartError("sampled custom positions must have shape (N1,N2,3)")
    else:
        pos = pf(U1, U2)

    chart = SurfaceChart(
        family=family, domain=domain, shape=(n1, n2), periodic2=periodic2,
        u1=u1, u2=u2, pos=pos, t1=None, t2=None, normal=None, metric=None,
        metric_inv=None, sqrt_g=None, second_form=None, shape_op=None,
        dn1=None, dn2=None, frame_e1=None, frame_e2=None, ginv_half=None,
        quad_w=None, du=du, theta_scheme=theta_scheme, profile=profile,
    )

    # tangents: analytic when available, else finite differences of samples
    if d1f is not None and d2f is not None:
        chart.t1 = d1f(U1, U2)
        chart.t2 = d2f(U1, U2)
    else:
        chart.t1 = chart.d1(pos)
        chart.t2 = chart.d2(pos)

    cross = np.cross(chart.t1, chart.t2)
    area2 = np.linalg.norm(cross, axis=-1)
    bad = area2 < 1e-10
    if np.any(bad):
        i, j = np.argwhere(bad)[0]
        raise ChartError(
            "degenerate parametrization at node (%d, %d), u=(%g, %g): |t1 x t2| = %.3e"
            % (i, j, u1[i], u2[j], area2[i, j])
        )
    chart.normal = cross / area2[..., None]

    g11 = np.einsum("xyc,xyc->xy", chart.t1, chart.t1)
    g12 = np.einsum("xyc,xyc->xy", chart.t1, chart.t2)
    g22 = np.einsum("xyc,xyc->xy", chart.t2, chart.t2)
    chart.metric = np.stack(
        [np.stack([g11, g12], axis=-1), np.stack([g12, g22], axis=-1)], axis=-2
    )
    det = g11 * g22 - g12 * g12
    chart.sqrt_g = np.sqrt(det)
    inv = np.empty_like(chart.metric)
    inv[..., 0, 0] = g22 / det
    inv[..., 1, 1] = g11 / det
    inv[..., 0, 1] = inv[..., 1, 0] = -g12 / det
    chart.metric_inv = inv

    # second fundamental form h_ij = (d_i n) . t_j = -n . d_ij r
    if family != "custom" or (d11f is not None and d12f is not None and d22f is not None):
        h11 = -np.einsum("xyc,xyc->xy", chart.normal, d11f(U1, U2))
        h12 = -np.einsum("xyc,xyc->xy", chart.normal, d12f(U1, U2))
        h22 = -np.einsum("xyc,xyc->xy", chart.normal, d22f(U1, U2))
    else:
        dn1 = chart.d1(chart.normal)
        dn2 = chart.d2(chart.normal)
        h11 = np.einsum("xyc,xyc->xy", dn1, chart.t1)
        h12 = 0.5 * (np.einsum("xyc,xyc->xy", dn1, chart.t2)
                     + np.einsum("xyc,xyc->xy", dn2, chart.t1))
        h22 = np.einsum("xyc,xyc->xy", dn2, chart.t2)
    chart.second_form = np.stack(
        [np.stack([h11, h12], axis=-1), np.stack([h12, h22], axis=-1)], axis=-2
    )
    chart.shape_op = np.einsum("xyik,xykj->xyij", chart.metric_inv, chart.second_form)

    # d_j n = S^i_j t_i  (tangency of the normal's derivative)
    t = np.stack([chart.t1, chart.t2], axis=2)
    dn = np.einsum("xyij,xyic->xyjc", chart.shape_op, t)
    chart.dn1 = dn[:, :, 0, :]
    chart.dn2 = dn[:, :, 1, :]

    # orthonormal tangent frame (Gram-Schmidt)
    e1 = chart.t1 / np.linalg.norm(chart.t1, axis=-1, keepdims=True)
    e2 = chart.t2 - np.einsum("xyc,xyc->xy", chart.t2, e1)[..., None] * e1
    e2 /= np.linalg.norm(e2, axis=-1, keepdims=True)
    chart.frame_e1, chart.frame_e2 = e1, e2

    # symmetric inverse square root of the 2x2 metric
    tr = g11 + g22
    s = np.sqrt(det)
    tau = np.sqrt(tr + 2.0 * s)  # with G^(1/2) = (G + s I)/tau
    ginv_half = np.empty_like(chart.metric)
    ginv_half[..., 0, 0] = (g22 + s) / (s * tau)
    ginv_half[..., 1, 1] = (g11 + s) / (s * tau)
    ginv_half[..., 0, 1] = ginv_half[..., 1, 0] = -g12 / (s * tau)
    chart.ginv_half = ginv_half

    w1 = ops.trapezoid_weights(n1, du[0], periodic=False)
    w2 = ops.trapezoid_weights(n2, du[1], periodic=periodic2)
    chart.quad_w = np.outer(w1, w2) * chart.sqrt_g

    for arr in (chart.pos, chart.t1, chart.t2, chart.normal, chart.metric,
                chart.metric_inv, chart.sqrt_g, chart.second_form,
                chart.shape_op, chart.dn1, chart.dn2, chart.frame_e1,
                chart.frame_e2, chart.ginv_half, chart.quad_w):
        arr.setflags(write=False)
    return chart


# ---------------------------------------------------------------------------
# operations on fields
# ---------------------------------------------------------------------------

def _check_grid(chart, values):
    if values.shape[:2] != chart.shape:
        raise ValueError("field grid %s does not match chart grid %s"
                         % (values.shape[:2], chart.shape))


def surface_gradient(chart, fld):
    """Per-node 3x2 Jacobian of a vector field w.r.t. chart coordinates."""
    fld = as_vector_field(fld)
    _check_grid(chart, fld.values)
    return np.stack([chart.d1(fld.values), chart.d2(fld.values)], axis=-1)


def sym_grad(chart, fld):
    """Chart coefficients of the symmetrized tangential gradient.

    b_ij = (d_i V . t_j + d_j V . t_i) / 2.
    """
    grad = surface_gradient(chart, fld)
    t = np.stack([chart.t1, chart.t2], axis=-1)  # (N1,N2,3,2)
    b = 0.5 * (np.einsum("xyci,xycj->xyij", grad, t)
               + np.einsum("xycj,xyci->xyij", grad, t))
    return FormField2(b)


def integrate(chart, scalar):
    """Surface integral of a nodal scalar field (trapezoid x sqrt(g))."""
    scalar = np.asarray(scalar, dtype=float)
    _check_grid(chart, scalar)
    return float(np.sum(chart.quad_w * scalar))


def frame_form(chart, form):
    """Convert a chart-coefficient form to the orthonormal tangent frame.

    F = G^{-1/2} b G^{-1/2}; trace and Frobenius norm of F are invariant
    under reparametrization of the same surface.
    """
    form = as_form_field(form)
    _check_grid(chart, form.coeff)
    if np.any(chart.sqrt_g <= 0) or not np.all(np.isfinite(chart.ginv_half)):
        raise ChartError("metric is not positive definite; chart is corrupted")
    return np.einsum("xyik,xykl,xylj->xyij", chart.ginv_half, form.coeff,
                     chart.ginv_half)


def tangential_vector_from_covector(chart, w1, w2):
    """3-vector v tangent to S with v . t_i = w_i (index raising)."""
    comp = np.einsum("xyij,xyj->xyi", chart.metric_inv,
                     np.stack([w1, w2], axis=-1))
    return comp[..., 0:1] * chart.t1 + comp[..., 1:2] * chart.t2


def tangential_part(chart, fld):
    """Split V into (V_tan, V.n)."""
    fld = as_vector_field(fld)
    vn = np.einsum("xyc,xyc->xy", fld.values, chart.normal)
    return fld.values - vn[..., None] * chart.normal, vn


def shape_operator_apply(chart, vtan):
    """Apply the shape operator (derivative of the normal) to tangent vectors."""
    rhs = np.stack([np.einsum("xyc,xyc->xy", vtan, chart.t1),
                    np.einsum("xyc,xyc->xy", vtan, chart.t2)], axis=-1)
    comp = np.einsum("xyij,xyj->xyi", chart.metric_inv, rhs)
    return comp[..., 0:1] * chart.dn1 + comp[..., 1:2] * chart.dn2


def gradient_matrix(chart, fld):
    """Lift the surface gradient of a vector field to a 3x3 node matrix.

    The result maps tangent vectors to directional derivatives and kills
    the normal: grad[V] t_i = d_i V, grad[V] n = 0.
    """
    grad = surface_gradient(chart, fld)            # (N1,N2,3,2) columns d_iV
    dual = chart.lift_dual()                        # (N1,N2,2,3)
    return np.einsum("xyci,xyid->xycd", grad, dual)


def shape_operator_matrix(chart):
    """3x3 lift of the shape operator: Pi t_i = d_i n, Pi n = 0."""
    dn = np.stack([chart.dn1, chart.dn2], axis=2)   # (N1,N2,2,3)
    dual = chart.lift_dual()
    return np.einsum("xyic,xyid->xycd", dn, dual)
