"""Limit shell energies, dead-load functionals and the optimal-rotation set.

The total energy at the thin limit combines a stretching term, quadratic
in the finite strain corrected by the quadratic displacement effect, and
a bending term, quadratic in the first-order change of the shape
operator; a dead load contributes a linear term through the best-aligned
rotation of the undeformed surface.
"""

from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from . import isometry as iso
from . import material as mat
from .geometry import FormField2, as_form_field, as_vector_field


@dataclass
class LoadSpec:
    """Dead load on the mid-surface with its integral invariants."""

    f: geo.VectorField3
    moment: np.ndarray       # integral of f (x) x
    mean: np.ndarray
    torque: np.ndarray
    mean_tol: float = 1e-8

    @property
    def mean_ok(self):
        scale = max(float(np.linalg.norm(self.moment)), 1.0)
        return bool(np.linalg.norm(self.mean) <= self.mean_tol * scale)


def make_load(chart, values, remove_mean=False, mean_tol=1e-8):
    """Build a LoadSpec from nodal force values; optionally remove the mean."""
    fld = as_vector_field(values)
    if fld.shape != chart.shape:
        raise ValueError("load grid does not match chart grid")
    vals = fld.values
    area = float(np.sum(chart.quad_w))
    if remove_mean:
        mean = np.einsum("xy,xyc->c", chart.quad_w, vals) / area
        vals = vals - mean
    mean = np.einsum("xy,xyc->c", chart.quad_w, vals)
    moment = np.einsum("xy,xyc,xyd->cd", chart.quad_w, vals, chart.pos)
    torque = np.einsum("xy,xyc->c", chart.quad_w, np.cross(vals, chart.pos))
    return LoadSpec(f=geo.VectorField3(vals), moment=moment, mean=mean,
                    torque=torque, mean_tol=mean_tol)


@dataclass
class RotationSetResult:
    m: float
    candidates: list
    degenerate: bool
    linearized_ok: bool
    linearized_residuals: np.ndarray
    torque: np.ndarray


@dataclass
class EnergyBreakdown:
    stretching: float
    bending: float
    load: float
    total: float
    kappa: float


# ---------------------------------------------------------------------------
# tensor ingredients
# ---------------------------------------------------------------------------

def a_squared_tan(chart, A):
    """Tangential coefficients of A^2: b_ij = (A^2 t_i) . t_j."""
    if not isinstance(A, iso.SkewField):
        A = iso.SkewField(np.asarray(A, float))
    if A.shape != chart.shape:
        raise ValueError("SkewField grid does not match chart grid")
    A2 = np.einsum("xycd,xyde->xyce", A.values, A.values)
    t = np.stack([chart.t1, chart.t2], axis=-2)
    b = np.einsum("xyce,xyie,xyjc->xyij", A2, t, t)
    # A^2 is symmetric for skew A; enforce exactly
    return FormField2(0.5 * (b + np.swapaxes(b, -1, -2)))


def bending_energy(chart, fld, moduli):
    """Bending part of the limit energy for a displacement V.

    (1/24) integral of Q2 over the frame-converted bending form of the
    skew extension of V.
    """
    A = iso.extend_A(chart, fld)
    F = geo.frame_form(chart, iso.bending_form(chart, A))
    return float(geo.integrate(chart, mat.q2_value(F, moduli)) / 24.0)


def stretching_energy(chart, form, A, kappa, moduli):
    """Stretching part: (1/2) integral of Q2 on B - (kappa/2) (A^2)_tan."""
    form = as_form_field(form)
    if kappa != 0.0:
        if A is None:
            raise ValueError("kappa > 0 requires the skew field A")
        corr = a_squared_tan(chart, A)
        arg = FormField2(form.coeff - 0.5 * kappa * corr.coeff)
    else:
        arg = form
    F = geo.frame_form(chart, arg)
    return float(0.5 * geo.integrate(chart, mat.q2_value(F, moduli)))


def load_work(chart, load, rotation, fld):
    """Linear load term: integral of f . (Q V)."""
    fld = as_vector_field(fld)
    qv = np.einsum("cd,xyd->xyc", rotation, fld.values)
    return float(geo.integrate(
        chart, np.einsum("xyc,xyc->xy", load.f.values, qv)))


def _check_rotation(Q):
    Q = np.asarray(Q, dtype=float)
    if Q.shape != (3, 3) or np.linalg.norm(Q.T @ Q - np.eye(3)) > 1e-10 \
            or abs(np.linalg.det(Q) - 1.0) > 1e-10:
        raise ValueError("expected a proper rotation matrix")
    return Q


def total_I(chart, fld, form, kappa, moduli):
    """Energy breakdown of the limit functional without loads."""
    fld = as_vector_field(fld)
    A = iso.extend_A(chart, fld)
    stretch = stretching_energy(chart, form, A, kappa, moduli)
    bend = bending_energy(chart, fld, moduli)
    return EnergyBreakdown(stretching=stretch, bending=bend, load=0.0,
                           total=stretch + bend, kappa=kappa)


def total_J(chart, fld, form, kappa, moduli, load, rotation):
    """Energy breakdown including the dead-load term -integral f . (Q V)."""
    rotation = _check_rotation(rotation)
    base = total_I(chart, fld, form, kappa, moduli)
    lw = load_work(chart, load, rotation, fld)
    return EnergyBreakdown(stretching=base.stretching, bending=base.bending,
                           load=lw, total=base.stretching + base.bending - lw,
                           kappa=kappa)


# ---------------------------------------------------------------------------
# optimal rotations of the undeformed surface
# ---------------------------------------------------------------------------

def _linearized_residuals(moment, candidates):
    """Skew defect of Q^T Fhat per candidate; zero iff the load does no
    first-order work on rotations through that candidate."""
    res = []
    for Q in candidates:
        S = Q.T @ moment
        res.append(np.linalg.norm(S - S.T) / np.sqrt(2.0))
    return np.array(res)


def _circle_family(U, V, count):
    out = []
    for phi in np.linspace(0.0, 2.0 * np.pi, count, endpoint=False):
        cp, sp = np.cos(phi), np.sin(phi)
        P = np.array([[1.0, 0.0, 0.0], [0.0, cp, sp], [0.0, sp, -cp]])
        out.append(U @ P @ V.T)
    return out


def _so3_samples(count, seed=0):
    rng = np.random.default_rng(seed)
    out = [np.eye(3)]
    while len(out) < count:
        q = rng.normal(size=4)
        q /= np.linalg.norm(q)
        w, x, y, z = q
        out.append(np.array([
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]))
    return out


def rotation_set(load, tol=1e-9, sample_count=64, seed=0):
    """Maximize tr(Q^T Fhat) over proper rotations.

    Uses the singular value decomposition Fhat = U S V^T: the maximizer is
    U diag(1, 1, det(UV^T)) V^T and the maximum is s1 + s2 + det(UV^T) s3.
    Degenerate moment matrices (coinciding relevant singular values, or
    Fhat = 0) yield a sampled family of maximizers and degenerate=True.
    """
    moment = np.asarray(getattr(load, "moment", load), dtype=float)
    if moment.shape != (3, 3):
        raise ValueError("expected a LoadSpec or a 3x3 moment matrix")
    default_torque = np.array([moment[2, 1] - moment[1, 2],
                               moment[0, 2] - moment[2, 0],
                               moment[1, 0] - moment[0, 1]])
    torque = np.asarray(getattr(load, "torque", default_torque), dtype=float)
    scale = float(np.linalg.norm(moment))
    if scale <= tol:
        cands = _so3_samples(sample_count, seed=seed)
        lin = _linearized_residuals(moment, cands)
        return RotationSetResult(
            m=0.0, candidates=cands, degenerate=True,
            linearized_ok=bool(np.all(lin <= max(tol * max(scale, 1.0), tol))),
            linearized_residuals=lin, torque=torque)
    U, sig, Vt = np.linalg.svd(moment)
    detuv = np.linalg.det(U @ Vt)
    qstar = U @ np.diag([1.0, 1.0, detuv]) @ Vt
    m = float(sig[0] + sig[1] + detuv * sig[2])
    degenerate = bool(sig[1] + detuv * sig[2] <= tol * max(sig[0], 1.0))
    candidates = [qstar]
    if degenerate:
        V = Vt.T
        if sig[1] <= tol * max(sig[0], 1.0):
            # rank-one moment: stabilizer circle about the leading axis
            Ur = U.copy()
            if detuv < 0:
                # flipping the null column keeps Fhat and makes det +1
                Ur[:, 2] *= -1.0
            fam = []
            for phi in np.linspace(0.0, 2.0 * np.pi, sample_count, endpoint=False):
                cp, sp = np.cos(phi), np.sin(phi)
                P = np.array([[1.0, 0, 0], [0, cp, -sp], [0, sp, cp]])
                fam.append(Ur @ P @ V.T)
            candidates = fam
        else:
            # det(UV^T) = -1 with coinciding trailing singular values:
            # one-parameter family of reflected completions
            candidates = _circle_family(U, V, sample_count)
    lin = _linearized_residuals(moment, candidates)
    return RotationSetResult(
        m=m, candidates=candidates, degenerate=degenerate,
        linearized_ok=bool(np.all(lin <= 1e-9 * max(scale, 1.0) + 1e-12)),
        linearized_residuals=lin, torque=torque)
