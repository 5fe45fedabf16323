"""Finite-strain machinery: plate compatibility, the constructive membrane
solver for surfaces of revolution, robustness classification, and
least-squares projection onto symmetric-gradient dictionaries.

The revolution solver reduces the strain system to one linear ODE per
circumferential Fourier mode.  All circumferential operations are
spectral (exact for bandlimited data); the axial direction uses 4th-order
differences, cubic-spline sampling and a classical order-4 one-step
integrator, so round-trip residuals decay at 4th order.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from . import geometry as geo
from . import operators as ops
from .geometry import FormField2, VectorField3, as_form_field, as_vector_field


@dataclass
class MembraneSolution:
    w: VectorField3
    residual: float
    fourier_order: int
    flagged: bool = False
    components: dict = field(default_factory=dict)


@dataclass
class RobustnessReport:
    label: str
    evidence: dict


@dataclass
class ProjectionResult:
    coefficients: np.ndarray
    residual: float
    w: VectorField3
    flagged: bool = False
    n_generators: int = 0


# ---------------------------------------------------------------------------
# plate compatibility
# ---------------------------------------------------------------------------

def curl_curl(chart, form):
    """Double-curl compatibility residual of a form on a flat chart.

    d22 B11 + d11 B22 - 2 d1 d2 B12; vanishes exactly on symmetric
    gradients of displacements of a plate.
    """
    if chart.family != "plate":
        raise ValueError("curl_curl is defined on plate charts only")
    form = as_form_field(form)
    if form.shape != chart.shape:
        raise ValueError("form grid does not match chart grid")
    b11 = form.coeff[..., 0, 0]
    b22 = form.coeff[..., 1, 1]
    b12 = form.coeff[..., 0, 1]
    h1, h2 = chart.du
    d22_b11 = ops.fd2_apply(b11, h2, axis=1)
    d11_b22 = ops.fd2_apply(b22, h1, axis=0)
    d12_b12 = ops.fd1_apply(ops.fd1_apply(b12, h1, axis=0), h2, axis=1)
    return d22_b11 + d11_b22 - 2.0 * d12_b12


# ---------------------------------------------------------------------------
# surface-of-revolution membrane solver
# ---------------------------------------------------------------------------

def _require_revolution(chart):
    if chart.family not in ("cylinder", "revolution") or not chart.profile:
        raise ValueError("solver needs a revolution (or cylinder) chart "
                         "with profile callables")
    return chart.profile["g"], chart.profile["gp"], chart.profile["gpp"]


def _rk4_second_order(s, coeff_fn, rhs_spline, nk):
    """Integrate y_k'' = coeff_k(s) y_k + rhs_k(s) from zero initial data.

    Classical order-4 one-step method, vectorized over all modes k at
    once; coeff_fn(si) and rhs_spline(si) return per-mode vectors.
    """
    n = s.size
    y = np.zeros((n, nk), dtype=complex)
    yp = np.zeros((n, nk), dtype=complex)

    def f(si, b, bp):
        return bp, coeff_fn(si) * b + rhs_spline(si)

    for i in range(n - 1):
        h = s[i + 1] - s[i]
        b, bp = y[i], yp[i]
        k1b, k1p = f(s[i], b, bp)
        k2b, k2p = f(s[i] + 0.5 * h, b + 0.5 * h * k1b, bp + 0.5 * h * k1p)
        k3b, k3p = f(s[i] + 0.5 * h, b + 0.5 * h * k2b, bp + 0.5 * h * k2p)
        k4b, k4p = f(s[i] + h, b + h * k3b, bp + h * k3p)
        y[i + 1] = b + (h / 6.0) * (k1b + 2 * k2b + 2 * k3b + k4b)
        yp[i + 1] = bp + (h / 6.0) * (k1p + 2 * k2p + 2 * k3p + k4p)
    return y, yp


def membrane_sym_grad(chart, fld):
    """Symmetrized tangential gradient with the solver's derivative ops
    (spectral circumferential, 4th-order axial)."""
    fld = as_vector_field(fld)
    if fld.shape != chart.shape:
        raise ValueError("field grid does not match chart grid")
    dsw = ops.fd1_apply_order4(fld.values, chart.du[0], axis=0)
    period = chart.domain[1][1] - chart.domain[1][0]
    dtw = ops.spectral_apply(fld.values, period, axis=1)
    t = np.stack([chart.t1, chart.t2], axis=-1)
    grad = np.stack([dsw, dtw], axis=-1)
    b = 0.5 * (np.einsum("xyci,xycj->xyij", grad, t)
               + np.einsum("xycj,xyci->xyij", grad, t))
    return FormField2(b)


def form_rel_distance(chart, form_a, form_b):
    """Relative L2 distance of two forms in the frame Frobenius norm."""
    fa = geo.frame_form(chart, as_form_field(form_a))
    fb = geo.frame_form(chart, as_form_field(form_b))
    diff = fa - fb
    num = geo.integrate(chart, np.einsum("xyij,xyij->xy", diff, diff))
    den = geo.integrate(chart, np.einsum("xyij,xyij->xy", fb, fb))
    if den <= 0:
        return float(np.sqrt(num))
    return float(np.sqrt(num / den))


def solve_revolution_membrane(chart, form, fourier_order=None,
                              warn_threshold=1e-3):
    """Construct w with sym grad w equal to a given form on a revolution chart.

    Writes w = a gamma + b gamma' + c e3 in the rotating frame.  The
    coefficient b satisfies, per circumferential Fourier mode k,

        b_k'' - (g''/g)(1 - k^2) b_k = psi_k / g,
        psi = 2 ds B12 - dtheta B11 - (g''/g) dtheta B22,

    integrated from zero initial data; a follows from the hoop equation
    and c from a joint least squares over the two equations containing it,
    whose residual is reported instead of silently drifting.
    """
    g, gp, gpp = _require_revolution(chart)
    form = as_form_field(form)
    if form.shape != chart.shape:
        raise ValueError("form grid does not match chart grid")
    n1, n2 = chart.shape
    if fourier_order is None:
        fourier_order = min(n2 // 2 - 1, 32)
    N = int(fourier_order)
    if not (0 <= N <= n2 // 2):
        raise ValueError("fourier_order out of range")

    s = chart.u1
    theta = chart.u2
    gs, gps, gpps = (np.asarray(f(s), float) for f in (g, gp, gpp))
    if np.any(gs <= 0):
        raise ValueError("profile must be positive on the s-grid")

    B11 = form.coeff[..., 0, 0]
    B22 = form.coeff[..., 1, 1]
    B12 = form.coeff[..., 0, 1]

    # circumferential spectra, truncated at the requested order
    def rfft_trunc(F):
        Fh = np.fft.rfft(F, axis=1)
        Fh[:, N + 1:] = 0.0
        return Fh

    B11h = rfft_trunc(B11)
    B22h = rfft_trunc(B22)
    B12h = rfft_trunc(B12)
    kvals = np.arange(B11h.shape[1])

    dsB12h = ops.fd1_apply_order4(B12h.real, chart.du[0], axis=0) \
        + 1j * ops.fd1_apply_order4(B12h.imag, chart.du[0], axis=0)
    psih = (2.0 * dsB12h
            - (1j * kvals)[None, :] * B11h
            - (gpps / gs)[:, None] * (1j * kvals)[None, :] * B22h)

    nk = N + 1
    spline = CubicSpline(s, psih[:, :nk] / gs[:, None], axis=0,
                         bc_type="not-a-knot")
    kfac = 1.0 - kvals[:nk].astype(float) ** 2

    def coeff_fn(si):
        return (gpp(si) / g(si)) * kfac

    bh = np.zeros_like(B11h)
    bph = np.zeros_like(B11h)
    bh[:, :nk], bph[:, :nk] = _rk4_second_order(s, coeff_fn, spline, nk)

    ah = B22h / gs[:, None] - (1j * kvals)[None, :] * bh
    dsB22_over_g = ops.fd1_apply_order4((B22h / gs[:, None]).real, chart.du[0], axis=0) \
        + 1j * ops.fd1_apply_order4((B22h / gs[:, None]).imag, chart.du[0], axis=0)
    daph = dsB22_over_g - (1j * kvals)[None, :] * bph

    # c from least squares on {ds c = B11 - g' ds a ; dtheta c = 2 B12 - g'(dtheta a - b) - g ds b}
    R1 = B11h - gps[:, None] * daph
    R2 = (2.0 * B12h
          - gps[:, None] * ((1j * kvals)[None, :] * ah - bh)
          - gs[:, None] * bph)
    Ds = ops.fd1_matrix_order4(n1, chart.du[0])
    ch = np.zeros_like(B11h)
    eye = np.eye(n1)
    for k in range(N + 1):
        A = np.vstack([Ds, (1j * k) * eye])
        rhs = np.concatenate([R1[:, k], R2[:, k]])
        sol, *_ = np.linalg.lstsq(A.astype(complex), rhs, rcond=None)
        ch[:, k] = sol

    def irfft_full(Fh):
        return np.fft.irfft(Fh, n=n2, axis=1)

    a = irfft_full(ah)
    b = irfft_full(bh)
    c = irfft_full(ch)

    gamma = np.stack([np.cos(theta), np.sin(theta), np.zeros_like(theta)], axis=-1)
    gammap = np.stack([-np.sin(theta), np.cos(theta), np.zeros_like(theta)], axis=-1)
    e3 = np.array([0.0, 0.0, 1.0])
    w = (a[..., None] * gamma[None, :, :]
         + b[..., None] * gammap[None, :, :]
         + c[..., None] * e3)

    wf = VectorField3(w)
    residual = form_rel_distance(chart, membrane_sym_grad(chart, wf), form)
    return MembraneSolution(
        w=wf, residual=residual, fourier_order=N,
        flagged=bool(residual > warn_threshold),
        components={"a": a, "b": b, "c": c})


# ---------------------------------------------------------------------------
# robustness classification
# ---------------------------------------------------------------------------

def robustness_classify(chart):
    """Label the chart per the curvature-based robustness taxonomy.

    Conservative thresholds; curvature extremes are always attached as
    evidence.  "Unknown" is a valid outcome.
    """
    h_max = float(np.max(np.abs(chart.second_form)))
    eigs = np.linalg.eigvals(chart.shape_op.reshape(-1, 2, 2))
    eigs = np.sort(eigs.real, axis=1)
    kmin, kmax = float(eigs[:, 0].min()), float(eigs[:, 1].max())
    gauss = eigs[:, 0] * eigs[:, 1]
    pi_norm = np.linalg.norm(chart.shape_op.reshape(-1, 2, 2), axis=(1, 2))
    evidence = {
        "max_abs_second_form": h_max,
        "shape_eig_min": kmin,
        "shape_eig_max": kmax,
        "gauss_min": float(gauss.min()),
        "gauss_max": float(gauss.max()),
        "shape_norm_min": float(pi_norm.min()),
    }
    if h_max <= 1e-10:
        return RobustnessReport("NotApproximatelyRobust-Plate", evidence)
    if chart.family in ("cylinder", "revolution"):
        return RobustnessReport("Robust-Revolution", evidence)
    if np.all(eigs > 1e-6) or np.all(eigs < -1e-6):
        return RobustnessReport("Robust-Convex", evidence)
    if np.max(np.abs(gauss)) <= 1e-8 and np.min(pi_norm) >= 1e-4:
        return RobustnessReport("Robust-Developable", evidence)
    return RobustnessReport("Unknown", evidence)


# ---------------------------------------------------------------------------
# dictionary projection
# ---------------------------------------------------------------------------

def _dictionary_strains(chart, degree):
    """Analytic symmetric gradients of tensor-product generator fields.

    Non-periodic charts use bivariate monomials up to total degree;
    periodic charts use axial monomials times circumferential harmonics up
    to the given order.  Each generator populates one Cartesian component.
    """
    n1, n2 = chart.shape
    U1, U2 = np.meshgrid(chart.u1, chart.u2, indexing="ij")
    bases = []   # (f, df/du1, df/du2) sampled
    labels = []
    if chart.periodic2:
        for p in range(degree + 1):
            sp = U1**p
            dsp = p * U1 ** max(p - 1, 0) if p > 0 else np.zeros_like(U1)
            for k in range(degree + 1):
                trigs = [(np.cos(k * U2), -k * np.sin(k * U2), "cos")]
                if k > 0:
                    trigs.append((np.sin(k * U2), k * np.cos(k * U2), "sin"))
                for tval, tder, name in trigs:
                    bases.append((sp * tval, dsp * tval, sp * tder))
                    labels.append("s^%d %s(%d t)" % (p, name, k))
    else:
        for p in range(degree + 1):
            for q in range(degree + 1 - p):
                f = U1**p * U2**q
                f1 = p * U1 ** max(p - 1, 0) * U2**q if p > 0 else np.zeros_like(U1)
                f2 = q * U1**p * U2 ** max(q - 1, 0) if q > 0 else np.zeros_like(U1)
                bases.append((f, f1, f2))
                labels.append("u1^%d u2^%d" % (p, q))
    strains = []
    gens = []
    names = []
    for c in range(3):
        for (f, f1, f2), lab in zip(bases, labels):
            b11 = f1 * chart.t1[..., c]
            b22 = f2 * chart.t2[..., c]
            b12 = 0.5 * (f2 * chart.t1[..., c] + f1 * chart.t2[..., c])
            b = np.stack([np.stack([b11, b12], axis=-1),
                          np.stack([b12, b22], axis=-1)], axis=-2)
            strains.append(b)
            gens.append((c, f))
            names.append("e%d * %s" % (c, lab))
    return strains, gens, names


def _weighted_rows(chart, frame):
    sw = np.sqrt(chart.quad_w.ravel())
    return np.concatenate([sw * frame[..., 0, 0].ravel(),
                           sw * frame[..., 1, 1].ravel(),
                           np.sqrt(2.0) * sw * frame[..., 0, 1].ravel()])


def project_to_B(chart, target, degree=4, ridge=1e-12):
    """Least-squares projection of a form onto a symmetric-gradient span.

    Solves min over coefficients of the weighted L2 frame distance between
    the target and the span of the dictionary strains; returns the best
    coefficients, the relative residual, and the realizing displacement.
    Generators with identically zero strain are pruned; a rank-deficient
    system is re-solved with a ridge and flagged.
    """
    target = as_form_field(target)
    if target.shape != chart.shape:
        raise ValueError("target grid does not match chart grid")
    strains, gens, names = _dictionary_strains(chart, degree)
    cols = np.stack([_weighted_rows(chart, geo.frame_form(chart, FormField2(b)))
                     for b in strains], axis=1)
    norms = np.linalg.norm(cols, axis=0)
    keep = norms > 1e-14 * max(norms.max(), 1e-300)
    cols = cols[:, keep]
    kept_idx = np.flatnonzero(keep)
    y = _weighted_rows(chart, geo.frame_form(chart, target))

    sol, res_, rank, _ = np.linalg.lstsq(cols, y, rcond=None)
    flagged = rank < cols.shape[1]
    if flagged:
        G = cols.T @ cols
        G[np.diag_indices_from(G)] += ridge * max(np.max(np.diag(G)), 1.0)
        sol = np.linalg.solve(G, cols.T @ y)
    y_norm = np.linalg.norm(y)
    resid = np.linalg.norm(cols @ sol - y) / (y_norm if y_norm > 0 else 1.0)

    coeffs = np.zeros(len(strains))
    coeffs[kept_idx] = sol
    w = np.zeros(chart.shape + (3,))
    for cval, (c, f) in zip(coeffs, gens):
        if cval != 0.0:
            w[..., c] += cval * f
    return ProjectionResult(coefficients=coeffs, residual=float(resid),
                            w=VectorField3(w), flagged=bool(flagged),
                            n_generators=int(cols.shape[1]))
