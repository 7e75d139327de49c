"""Hamiltonian flows of the integrals, Abel-type equations and angle variables.

Flows follow d xi / d t_k = Pi grad I_k, so every observable evolves as
df/dt_k = {f, I_k}.  Integration is an adaptive Dormand-Prince 5(4) pair on
the complex state with a real time parameter.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import LogBranchAmbiguity, SingularityEncountered, SovChainError, StepFailure
from .model import casimir_observables, integral_gradients
from .poisson import RATIONAL, TRIGONOMETRIC, as_coords, build_bivector, coord_index, \
    coord_names
from .sov import NONSTANDARD, SeparatedPoint, separated_gradients, separate

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100,
                1 / 40])
_E = _B5 - _B4

DEFAULT_TOL = 1e-10


def flow_field(spec, k):
    """Right-hand side xi -> Pi(xi) grad I_k(xi) of the t_k flow."""
    bv = build_bivector(spec)

    def rhs(x):
        _, g = integral_gradients(spec, x)
        return bv.matrix(x) @ g[k]

    return rhs


@dataclass
class IntegratorStats:
    steps: int = 0
    rejected: int = 0
    max_local_error: float = 0.0
    rhs_evals: int = 0


def dopri5(rhs, y0, times, tol=DEFAULT_TOL, h0=None, max_steps=200000, h_min_rel=1e-14):
    """Integrate y' = rhs(y) and return the states at ``times`` (ascending, t0 first).

    Steps are clipped so every requested time is hit exactly.
    """
    times = np.asarray(times, dtype=float)
    y = np.array(y0, dtype=np.complex128)
    out = np.zeros((len(times), y.size), dtype=np.complex128)
    out[0] = y
    stats = IntegratorStats()
    t = float(times[0])
    t_end = float(times[-1])
    if t_end == t:
        out[:] = y
        return out, stats
    direction = 1.0 if t_end > t else -1.0
    k1 = rhs(y)
    stats.rhs_evals += 1
    if h0 is None:
        scale = tol + tol * np.abs(y)
        d0 = np.max(np.abs(y) / scale)
        d1 = np.max(np.abs(k1) / scale)
        h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        h0 = min(h0, abs(t_end - t))
    h = abs(h0)
    idx = 1
    while idx < len(times):
        target = float(times[idx])
        if stats.steps + stats.rejected > max_steps:
            raise StepFailure("maximum number of steps exceeded", t=t)
        step = min(h, abs(target - t))
        last = step >= abs(target - t) * (1 - 1e-14)
        hs = direction * step
        ks = [k1]
        # overflow near a blow-up is caught by the finiteness check below
        with np.errstate(over="ignore", invalid="ignore"):
            for s in range(1, 7):
                acc = y + hs * sum(a * kk for a, kk in zip(_A[s], ks))
                ks.append(rhs(acc))
            y5 = y + hs * sum(b * kk for b, kk in zip(_B5, ks) if b != 0.0)
            err = hs * sum(e * kk for e, kk in zip(_E, ks))
        stats.rhs_evals += 6
        if not np.all(np.isfinite(y5)):
            raise SingularityEncountered("state became non-finite", t=t)
        sc = tol + tol * np.maximum(np.abs(y), np.abs(y5))
        enorm = float(np.max(np.abs(err) / sc))
        if enorm <= 1.0:
            t = target if last else t + hs
            y = y5
            k1 = ks[6]  # first-same-as-last
            stats.steps += 1
            stats.max_local_error = max(stats.max_local_error, float(np.max(np.abs(err))))
            if last:
                out[idx] = y
                idx += 1
            fac = 5.0 if enorm == 0 else min(5.0, max(0.2, 0.9 * enorm ** -0.2))
            h = step * fac if not last else max(h, step * fac)
        else:
            stats.rejected += 1
            h = step * max(0.1, 0.9 * enorm ** -0.2)
        if h < h_min_rel * max(1.0, abs(t)):
            raise StepFailure("step size underflow: local error cannot meet tolerance", t=t)
    return out, stats


def match_roots(prev_x, x, p):
    """Reorder (x, p) to follow ``prev_x`` by minimal total displacement."""
    cost = np.abs(prev_x[:, None] - x[None, :])
    _, cols = linear_sum_assignment(cost)
    return x[cols], p[cols]


@dataclass
class Trajectory:
    spec: object
    times: np.ndarray
    states: np.ndarray
    separated: list
    flow_index: int
    stats: IntegratorStats
    convention: str = NONSTANDARD
    phi: np.ndarray = field(default=None)

    @property
    def x(self):
        return np.array([s.x for s in self.separated])

    @property
    def p(self):
        return np.array([s.p for s in self.separated])


def _separate_along(spec, states, times, convention):
    seps = []
    prev = None
    for t, st in zip(times, states):
        try:
            sp = separate(spec, st, convention)
        except SovChainError as exc:
            raise SingularityEncountered(f"separation failed along the flow: {exc}",
                                         t=float(t)) from exc
        if prev is not None:
            x, p = match_roots(prev.x, sp.x, sp.p)
            order = [int(np.argmin(np.abs(sp.x - xx))) for xx in x]
            sp = SeparatedPoint(x, p, convention, sp.root_condition[order])
        for v in spec.nu:
            if np.min(np.abs(sp.x - v)) < 1e-8 * max(1.0, abs(v)):
                raise SingularityEncountered("separated coordinate hit a pole", t=float(t))
        seps.append(sp)
        prev = sp
    return seps


def integrate_flow(spec, xi0, k, t_end, tol=DEFAULT_TOL, samples=101, times=None,
                   convention=NONSTANDARD, track=True):
    """Integrate the t_k flow from ``xi0`` and track separated variables."""
    if not 0 <= k <= spec.N:
        raise ValueError(f"flow index {k} outside 0..{spec.N}")
    if times is None:
        times = np.linspace(0.0, float(t_end), samples if t_end != 0 else 1)
    times = np.asarray(times, dtype=float)
    y0 = np.asarray(as_coords(xi0), dtype=np.complex128)
    states, stats = dopri5(flow_field(spec, k), y0, times, tol=tol)
    seps = _separate_along(spec, states, times, convention) if track else []
    traj = Trajectory(spec, times, states, seps, k, stats, convention)
    if track:
        try:
            traj.phi = unwrap_log(traj.p)
        except LogBranchAmbiguity:
            traj.phi = None
    return traj


def compose_flows(spec, xi0, j, k, t, tol=1e-12):
    """State after the t_j flow then the t_k flow, each for time ``t``."""
    a = integrate_flow(spec, xi0, j, t, tol=tol, samples=2, track=False).states[-1]
    return integrate_flow(spec, a, k, t, tol=tol, samples=2, track=False).states[-1]


def unwrap_log(p, max_jump=math.pi / 2):
    """Continuous branch of log p along axis 0 of ``p`` (samples x roots)."""
    p = np.atleast_2d(np.asarray(p, dtype=np.complex128))
    mags = np.abs(p)
    if np.any(mags < 1e-300) or np.any(mags < 1e-12 * mags.max()):
        raise LogBranchAmbiguity("momentum passes through zero")
    ang = np.angle(p)
    jumps = np.diff(ang, axis=0)
    jumps = (jumps + np.pi) % (2 * np.pi) - np.pi
    if jumps.size and np.max(np.abs(jumps)) > max_jump:
        raise LogBranchAmbiguity("phase of a momentum jumps too far between samples")
    unwrapped = np.concatenate([ang[:1], ang[:1] + np.cumsum(jumps, axis=0)], axis=0)
    return np.log(mags) + 1j * unwrapped


# ---------------------------------------------------------------------------
# conservation
# ---------------------------------------------------------------------------

def conservation_report(spec, traj):
    """Max relative drift of every integral and named Casimir along ``traj``."""
    obs = [(name, o.value) for name, o in casimir_observables(spec)]
    drift = {}
    vals0, _ = integral_gradients(spec, traj.states[0])
    ints = np.array([integral_gradients(spec, s)[0] for s in traj.states])
    for kk in range(spec.N + 1):
        ref = max(abs(vals0[kk]), 1e-300)
        drift[f"I{kk}"] = float(np.max(np.abs(ints[:, kk] - vals0[kk])) / ref)
    for name, fn in obs:
        v = np.array([fn(s) for s in traj.states])
        ref = max(abs(v[0]), 1e-300)
        drift[name] = float(np.max(np.abs(v - v[0])) / ref)
    return drift


# ---------------------------------------------------------------------------
# Abel-type equations
# ---------------------------------------------------------------------------

def flow_derivatives(spec, xi, convention=NONSTANDARD):
    """dx_i/dt_k and dp_i/dt_k for k = 1..N as (N_k, N_i) arrays."""
    sp, gx, gp = separated_gradients(spec, xi, convention)
    _, gI = integral_gradients(spec, xi)
    pi = build_bivector(spec).matrix(xi)
    fields = (pi @ gI[1:].T).T  # row k-1: Pi grad I_k
    return sp, fields @ gx.T, fields @ gp.T


def _pencil(spec, xi):
    vals, _ = integral_gradients(spec, xi)
    return np.asarray(vals)  # descending: P(u) = sum vals[m] u^(N-m)


def _pencil_eval(vals, x):
    n = len(vals) - 1
    return sum(vals[m] * x ** (n - m) for m in range(n + 1))


def _pencil_deriv(vals, x, literal=False):
    n = len(vals) - 1
    lo = 1 if literal else 0
    return sum((n - m) * vals[m] * x ** (n - m - 1) for m in range(lo, n))


def abel_coordinate_matrix(spec, xi, convention=NONSTANDARD):
    """R[j-1, k-1] = sum_i x_i^(N-j) / P(x_i) * {I_k, x_i} + delta_jk."""
    sp, dx, _ = flow_derivatives(spec, xi, convention)
    vals = _pencil(spec, xi)
    n = spec.N
    P = _pencil_eval(vals, sp.x)
    br = -dx  # {I_k, x_i} = -dx_i/dt_k
    R = np.zeros((n, n), dtype=np.complex128)
    for j in range(1, n + 1):
        w = sp.x ** (n - j) / P
        for k in range(1, n + 1):
            R[j - 1, k - 1] = np.sum(w * br[k - 1]) + (1.0 if j == k else 0.0)
    return R


def trig_correction(spec, xi):
    """(-1)^N c11^2 prod(nu_l c1_l) / I_N^2, which equals I_0 / I_N when c22 = 0."""
    x = np.asarray(as_coords(xi))
    c11 = spec.twist.c[0, 0]
    prod = 1.0 + 0j
    for l in range(spec.N):
        s01 = x[coord_index(spec.model, l, "S01")]
        s11 = x[coord_index(spec.model, l, "S11")]
        prod *= spec.nu[l] * (4 * s01 * s01 - s11 * s11)
    vals = _pencil(spec, x)
    return (-1) ** spec.N * c11 * c11 * prod / vals[-1] ** 2


def momentum_weights(spec, xi, sp, literal=False):
    """W[j-1, i] multiplying (1/p_i) dp_i/dt_k in the momentum Abel equations."""
    vals = _pencil(spec, xi)
    n = spec.N
    dP = _pencil_deriv(vals, sp.x, literal=literal)
    W = np.zeros((n, n), dtype=np.complex128)
    corr = trig_correction(spec, xi) if spec.model == TRIGONOMETRIC else 0.0
    for j in range(1, n + 1):
        w = sp.x ** (n - j)
        if spec.model == TRIGONOMETRIC:
            if j == n:
                w = w - sp.x ** n * corr
            w = w / sp.x
        W[j - 1] = w / dP
    return W


def abel_momentum_matrix(spec, xi, convention=NONSTANDARD, literal=False):
    """R[j-1, k-1] = sum_i W_ji (1/p_i) dp_i/dt_k - delta_jk."""
    sp, _, dp = flow_derivatives(spec, xi, convention)
    W = momentum_weights(spec, xi, sp, literal=literal)
    logd = dp / sp.p[None, :]  # (k, i)
    return W @ logd.T - np.eye(spec.N)


def abel_residual_coordinates(spec, trajectory, j, k):
    """History over the trajectory samples of the (j, k) coordinate equation."""
    return np.array([abel_coordinate_matrix(spec, s, trajectory.convention)[j - 1, k - 1]
                     for s in trajectory.states])


def abel_residual_momenta(spec, trajectory, j, k, literal=False):
    return np.array([abel_momentum_matrix(spec, s, trajectory.convention, literal)[j - 1, k - 1]
                     for s in trajectory.states])


# ---------------------------------------------------------------------------
# angle variables
# ---------------------------------------------------------------------------

@dataclass
class AngleSolution:
    x: np.ndarray          # actions (constant separated coordinates)
    phi0: np.ndarray       # log p at the initial point
    slopes: np.ndarray     # slopes[i, k-1] = d phi_i / d t_k
    bracket_slopes: np.ndarray  # the same from {p_i, I_k} / p_i


def angle_solution(spec, xi0, convention=NONSTANDARD):
    """Predicted linear motion phi_i = phi_i^0 + sum_k slopes[i,k] t_k."""
    x0 = np.asarray(as_coords(xi0))
    sp, _, dp = flow_derivatives(spec, x0, convention)
    W = momentum_weights(spec, x0, sp)
    slopes = np.linalg.inv(W)  # W @ slopes = Id with slopes indexed [i, k]
    phi0 = unwrap_log(sp.p[None, :])[0]
    return AngleSolution(sp.x, phi0, slopes, (dp / sp.p[None, :]).T)


def fit_angle_slopes(trajectory):
    """Least-squares line through the unwrapped log p_i(t): slopes, intercepts, R^2."""
    phi = unwrap_log(trajectory.p)
    t = trajectory.times
    X = np.vstack([np.ones_like(t), t]).T
    coef, *_ = np.linalg.lstsq(X.astype(np.complex128), phi, rcond=None)
    fitted = X @ coef
    ss_res = np.sum(np.abs(phi - fitted) ** 2, axis=0)
    ss_tot = np.sum(np.abs(phi - phi.mean(axis=0)) ** 2, axis=0)
    r2 = np.where(ss_tot > 0, 1 - ss_res / np.where(ss_tot > 0, ss_tot, 1), 1.0)
    return {"slopes": coef[1], "intercepts": coef[0], "r2": r2}


def trig_integral_relations(spec, xi):
    """Residuals of the N=2 trigonometric relations between I_0, I_1, I_2,
    the Casimir roots K2, C2 and the actions, over all branch choices."""
    if spec.model != TRIGONOMETRIC or spec.N != 2:
        raise ValueError("relations are stated for the two-site trigonometric chain")
    x = np.asarray(as_coords(xi))
    c11 = spec.twist.c[0, 0]
    I0, I1, I2 = _pencil(spec, x)
    sp = separate(spec, x)
    x1, x2 = sp.x

    def site_c2(k):
        g = lambda n: x[coord_index(spec.model, k, n)]  # noqa: E731
        return (2 * g("S01") + g("S11")) * (2 * g("S02") + g("S22"))

    C2 = np.sqrt(complex(site_c2(0)))
    K2 = np.sqrt(complex(site_c2(1)))
    root = np.sqrt(complex(x1 * x2))
    branches = []
    for sk in (1, -1):
        for sc in (1, -1):
            for sr in (1, -1):
                kap = c11 * (sk * K2) * (sc * C2)
                s = sr * root
                pred = np.array([-1j * kap / s, 1j * kap * (x1 + x2) / s, -1j * kap * s])
                act = np.array([I0, I1, I2])
                rel = np.abs(pred - act) / np.maximum(np.abs(act), 1e-300)
                branches.append({"K2_sign": sk, "C2_sign": sc, "sqrt_sign": sr,
                                 "residuals": rel, "max": float(rel.max())})
    best = min(branches, key=lambda b: b["max"])
    product = abs(I0 * I2 + c11 ** 2 * K2 ** 2 * C2 ** 2) / max(abs(I0 * I2), 1e-300)
    ratio = abs(I2 / I0 - x1 * x2) / max(abs(x1 * x2), 1e-300)
    return {"best": best, "branches": branches, "product_identity": float(product),
            "ratio_identity": float(ratio), "I": (I0, I1, I2), "K2": K2, "C2": C2,
            "x": (x1, x2)}


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def trajectory_rows(traj):
    names = coord_names(traj.spec.model, traj.spec.N)
    n = traj.spec.N
    header = ["t"]
    for nm in names:
        header += [f"Re {nm}", f"Im {nm}"]
    for label in ("x", "p", "phi"):
        for i in range(n):
            header += [f"Re {label}{i + 1}", f"Im {label}{i + 1}"]
    phi = traj.phi
    rows = []
    for s in range(len(traj.times)):
        row = [repr(float(traj.times[s]))]
        for v in traj.states[s]:
            row += [repr(float(v.real)), repr(float(v.imag))]
        sep = traj.separated[s] if traj.separated else None
        for arr in ((sep.x if sep else None), (sep.p if sep else None),
                    (phi[s] if phi is not None else None)):
            for i in range(n):
                if arr is None:
                    row += ["nan", "nan"]
                else:
                    row += [repr(float(arr[i].real)), repr(float(arr[i].imag))]
        rows.append(row)
    return header, rows


def trajectory_to_csv(traj, path):
    header, rows = trajectory_rows(traj)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
