"""Minimization of the limit energies over the discrete isometry basis,
a finite-strain dictionary and the optimal-rotation candidates.

The bending-only problem is an exactly solvable symmetric linear system
on the rigid-complemented basis.  With a positive stretching coupling the
objective is quartic in the isometry coefficients: the strain
coefficients are eliminated exactly by linear least squares and the
isometry coefficients descend by BFGS with finite-difference gradients
and a backtracking line search, so the objective is non-increasing by
construction.
"""

from dataclasses import dataclass

import numpy as np

from . import functional as fn
from . import geometry as geo
from . import isometry as iso
from . import membrane as mem
from .geometry import FormField2, VectorField3


class MinimizationError(RuntimeError):
    """Line search failed to produce a monotone step."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass
class SolverOptions:
    tol: float = 1e-9
    max_iter: int = 200
    restarts: int = 2
    seed: int = 0
    fd_step: float = 1e-6


@dataclass
class MinimizationResult:
    V_star: VectorField3
    B_coeffs: np.ndarray
    B_field: FormField2
    rotation: np.ndarray
    value: float
    gradient_norm: float
    iterations: int
    table: list
    objective_history: list
    flagged: bool = False
    coefficients: np.ndarray = None


@dataclass
class WellposednessReport:
    ok: bool
    mean_norm: float
    linearized_residuals: np.ndarray
    failures: list


def wellposedness_check(load, candidates, tol=1e-9):
    """Mean-zero and per-candidate linearized compatibility of the load."""
    scale = max(float(np.linalg.norm(load.moment)), 1.0)
    mean_norm = float(np.linalg.norm(load.mean))
    failures = []
    if mean_norm > tol * scale:
        failures.append(("mean", load.mean.tolist()))
    res = fn._linearized_residuals(load.moment, candidates)
    for k, r in enumerate(res):
        if r > tol * scale:
            failures.append(("linearized", k, float(r)))
    return WellposednessReport(ok=not failures, mean_norm=mean_norm,
                               linearized_residuals=res, failures=failures)


# ---------------------------------------------------------------------------
# shared assembly
# ---------------------------------------------------------------------------

def _rigid_complement(chart, basis):
    rigid = iso.rigid_basis(chart)
    P = np.stack([basis.matrix.T @ (basis.gram @ iso.field_to_dof(r.values))
                  for r in rigid], axis=1)
    m = basis.matrix.shape[1]
    Qfull, Rtri = np.linalg.qr(P, mode="complete")
    diag = np.abs(np.diag(Rtri[:min(m, 6), :]))
    rank = int(np.sum(diag > 1e-10 * max(diag.max(), 1e-300)))
    Z = Qfull[:, rank:]
    reduced = basis.matrix @ Z
    fields = [VectorField3(iso.dof_to_field(reduced[:, k], chart.shape))
              for k in range(reduced.shape[1])]
    return fields, reduced


def _load_vector(chart, load, rotation, fields):
    return np.array([fn.load_work(chart, load, rotation, f) for f in fields])


def _stretch_rows(chart, moduli):
    """Row weighting so that |rows(F)|^2 = (1/2) integral Q2(F)."""
    sw = np.sqrt(0.5 * chart.quad_w.ravel())
    cmu = np.sqrt(2.0 * moduli.mu)
    ctr = np.sqrt(moduli.q2_trace_coeff)

    def rows(frame):
        f11 = frame[..., 0, 0].ravel()
        f22 = frame[..., 1, 1].ravel()
        f12 = frame[..., 0, 1].ravel()
        return np.concatenate([cmu * sw * f11, cmu * sw * f22,
                               cmu * np.sqrt(2.0) * sw * f12,
                               ctr * sw * (f11 + f22)])
    return rows


def _fd_grad(fun, x, step):
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        g[i] = (fun(x + e) - fun(x - e)) / (2.0 * step)
    return g


def _bfgs(fun, x0, tol, max_iter, fd_step):
    x = np.asarray(x0, dtype=float).copy()
    n = x.size
    H = np.eye(n)
    f = fun(x)
    g = _fd_grad(fun, x, fd_step)
    history = [f]
    it = 0
    while it < max_iter and np.linalg.norm(g) > tol:
        p = -H @ g
        if p @ g >= 0:
            p = -g
        alpha, fn_val = 1.0, None
        gp = g @ p
        for _ in range(60):
            cand = fun(x + alpha * p)
            if cand <= f + 1e-4 * alpha * gp:
                fn_val = cand
                break
            alpha *= 0.5
        if fn_val is None:
            if np.linalg.norm(g) <= 100.0 * tol:
                break
            raise MinimizationError(
                "line search exhausted without a monotone step",
                diagnostics={"iteration": it, "objective": f,
                             "gradient_norm": float(np.linalg.norm(g))})
        s = alpha * p
        x = x + s
        gn = _fd_grad(fun, x, fd_step)
        yv = gn - g
        sy = float(s @ yv)
        if sy > 1e-12 * np.linalg.norm(s) * max(np.linalg.norm(yv), 1e-300):
            rho = 1.0 / sy
            Imat = np.eye(n)
            H = (Imat - rho * np.outer(s, yv)) @ H @ (Imat - rho * np.outer(yv, s)) \
                + rho * np.outer(s, s)
        f, g = fn_val, gn
        history.append(f)
        it += 1
    return x, f, g, it, history


# ---------------------------------------------------------------------------
# bending-only minimization
# ---------------------------------------------------------------------------

def minimize_quadratic(chart, basis, load, candidates, moduli, opts=None):
    """Exact minimization of the bending functional minus the load term.

    Per rotation candidate, solves the symmetric positive semidefinite
    system on the rigid-complemented basis; the strain block decouples and
    its optimum is zero.
    """
    opts = opts or SolverOptions()
    fields, reduced = _rigid_complement(chart, basis)
    if not fields:
        raise ValueError("basis contains only rigid motions")
    G = iso.bending_q2_gram(chart, fields, moduli)
    G = 0.5 * (G + G.T)
    evals, evecs = np.linalg.eigh(G)
    cutoff = 1e-12 * max(evals[-1], 1e-300)
    flagged = bool(evals[0] <= cutoff)
    inv = np.where(evals > cutoff, 1.0 / np.maximum(evals, cutoff), 0.0)

    table = []
    best = None
    for k, Q in enumerate(candidates):
        ell = _load_vector(chart, load, Q, fields)
        xi = evecs @ (0.5 * inv * (evecs.T @ ell))
        value = float(xi @ G @ xi - ell @ xi)
        grad_norm = float(np.linalg.norm(2.0 * G @ xi - ell))
        table.append({"candidate": k, "value": value,
                      "gradient_norm": grad_norm})
        if best is None or value < best[0]:
            best = (value, k, xi, ell, grad_norm)
    value, k, xi, ell, grad_norm = best
    vdof = reduced @ xi
    vfield = VectorField3(iso.dof_to_field(vdof, chart.shape))
    zero_form = FormField2(np.zeros(chart.shape + (2, 2)))
    return MinimizationResult(
        V_star=vfield, B_coeffs=np.zeros(0), B_field=zero_form,
        rotation=np.asarray(candidates[k], float), value=value,
        gradient_norm=grad_norm, iterations=1, table=table,
        objective_history=[0.0, value], flagged=flagged, coefficients=xi)


# ---------------------------------------------------------------------------
# full quartic minimization
# ---------------------------------------------------------------------------

def minimize_J(chart, basis, load, candidates, kappa, moduli,
               dict_degree=4, opts=None):
    """Minimize the full limit functional over displacement and strain.

    The strain coefficients are eliminated by exact linear least squares
    at every displacement iterate (the strain subproblem is quadratic);
    the isometry coefficients descend by BFGS with central
    finite-difference gradients, the quadratic displacement effect making
    the reduced objective quartic.  Runs every rotation candidate and the
    configured number of seeded restarts; the best pair is returned.
    """
    if kappa <= 0:
        raise ValueError("minimize_J requires kappa > 0; "
                         "use minimize_quadratic for the bending-only case")
    opts = opts or SolverOptions()
    fields, reduced = _rigid_complement(chart, basis)
    if not fields:
        raise ValueError("basis contains only rigid motions")
    p = len(fields)
    G = iso.bending_q2_gram(chart, fields, moduli)
    G = 0.5 * (G + G.T)

    strains, gens, _ = mem._dictionary_strains(chart, dict_degree)
    rows = _stretch_rows(chart, moduli)
    cols = np.stack([rows(geo.frame_form(chart, FormField2(b)))
                     for b in strains], axis=1)
    norms = np.linalg.norm(cols, axis=0)
    keep = norms > 1e-14 * max(norms.max(), 1e-300)
    cols = cols[:, keep]
    kept_idx = np.flatnonzero(keep)
    colsq, colsr = np.linalg.qr(cols, mode="reduced")

    # the quadratic displacement effect is bilinear in the basis skew
    # fields: precompute its weighted rows on every mode pair
    A_fields = np.stack([iso.extend_A(chart, f).values for f in fields])
    t = np.stack([chart.t1, chart.t2], axis=-2)
    pair_rows = np.empty((p, p, cols.shape[0]))
    for i in range(p):
        for j in range(i, p):
            M = 0.5 * (np.einsum("xycd,xyde->xyce", A_fields[i], A_fields[j])
                       + np.einsum("xycd,xyde->xyce", A_fields[j], A_fields[i]))
            b = np.einsum("xyce,xyie,xyjc->xyij", M, t, t)
            b = 0.25 * kappa * (b + np.swapaxes(b, -1, -2))
            r = rows(geo.frame_form(chart, FormField2(b)))
            pair_rows[i, j] = pair_rows[j, i] = r

    def quad_target(xi):
        return np.einsum("i,j,ijr->r", xi, xi, pair_rows)

    rng = np.random.default_rng(opts.seed)
    starts = [np.zeros(p)]
    for _ in range(max(opts.restarts - 1, 0)):
        starts.append(0.1 * rng.standard_normal(p))

    table = []
    best = None
    for k, Q in enumerate(candidates):
        ell = _load_vector(chart, load, Q, fields)

        def objective(z, ell=ell):
            # strain step folded in exactly: the least-squares optimal
            # coefficients leave the orthogonal complement of the dictionary
            y = quad_target(z)
            if cols.shape[1]:
                y = y - colsq @ (colsq.T @ y)
            return float(y @ y) + float(z @ G @ z) - float(ell @ z)

        cand_best = None
        for xi0 in starts:
            xi, fval, grad, it, history = _bfgs(
                objective, xi0.copy(), opts.tol, opts.max_iter, opts.fd_step)
            flagged = it >= opts.max_iter
            diffs = np.diff(history)
            if history and np.any(diffs > 1e-10 * max(abs(history[0]), 1.0)):
                raise MinimizationError(
                    "objective increased along the iteration",
                    diagnostics={"history": history})
            y = quad_target(xi)
            beta = np.linalg.solve(colsr, colsq.T @ y) if cols.shape[1] \
                else np.zeros(0)
            entry = (fval, xi.copy(), beta, float(np.linalg.norm(grad)),
                     it, history, flagged)
            if cand_best is None or entry[0] < cand_best[0]:
                cand_best = entry
        table.append({"candidate": k, "value": cand_best[0],
                      "gradient_norm": cand_best[3],
                      "iterations": cand_best[4]})
        if best is None or cand_best[0] < best[0]:
            best = cand_best + (k,)

    value, xi, beta, grad_norm, iters, history, flagged, k = best
    vdof = reduced @ xi
    vfield = VectorField3(iso.dof_to_field(vdof, chart.shape))
    coeffs = np.zeros(len(strains))
    coeffs[kept_idx] = beta
    bfield = np.zeros(chart.shape + (2, 2))
    for cval, bstr in zip(coeffs, strains):
        if cval != 0.0:
            bfield += cval * bstr
    return MinimizationResult(
        V_star=vfield, B_coeffs=coeffs, B_field=FormField2(bfield),
        rotation=np.asarray(candidates[k], float), value=float(value),
        gradient_norm=grad_norm, iterations=iters, table=table,
        objective_history=history, flagged=flagged, coefficients=xi)
