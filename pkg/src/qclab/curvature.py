"""Curvature of the Biquard connection by differencing the connection field.

R(A, B) = [grad_A, grad_B] - grad_{[A,B]} acting on H, in the adapted moving
frame: directional derivatives of the connection-coefficient field along the
frame directions (central differences of step ``curv``), coefficient
commutators, and the structure-function term.  From the curvature slots:
Ricci, the three curvature 2-forms paired with the triple, the scalar
curvature and its normalization tau = Scal / (16 n (n+2)).
"""

from dataclasses import dataclass

import numpy as np

from .algebra import endo_inner
from .chart import FrameJet
from .connection import connection_at_point, torsion_tensors
from .errors import StepTooSmall
from .tolerances import DEFAULT_STEPS, DEFAULT_TOLERANCES


def _connection_matrices(chart, u, pivots, h_fd, tol):
    """Stacked connection matrices (m, 4n, 4n) at a displaced point, with
    the frame pivots frozen to the base point's."""
    from .chart import frame_field
    fr = frame_field(chart, u, pivot_order=pivots, tol=tol)
    jet = FrameJet(chart, u, h=h_fd, tol=tol, frame=fr)
    conn = connection_at_point(chart, u, jet=jet, tol=tol, split=False)
    return conn.stacked_matrices()


@dataclass
class CurvatureAtPoint:
    """Curvature slots R[alpha, beta] = matrix of R(f_alpha, f_beta)|H, the
    Ricci form on H, rho[s, alpha, beta], Scal, tau and the tau-derivatives
    along the Reeb directions."""

    frame: object
    conn: object
    R: np.ndarray            # (m, m, 4n, 4n)
    Ric: np.ndarray          # (4n, 4n)
    rho: np.ndarray          # (3, m, m)
    Scal: float
    tau: float
    dtau_xi: np.ndarray      # (3,) or None
    diagnostics: dict

    @property
    def fourn(self):
        return self.Ric.shape[0]


def _assemble_curvature(Gam0, dGam, kappa, directions):
    """R[alpha, beta] for the requested ordered pairs (alpha < beta)."""
    m = Gam0.shape[0]
    fourn = Gam0.shape[1]
    R = np.zeros((m, m, fourn, fourn))
    for a in directions:
        for b in directions:
            if b <= a:
                continue
            M = dGam[a][b] - dGam[b][a] \
                + Gam0[a] @ Gam0[b] - Gam0[b] @ Gam0[a] \
                - np.tensordot(kappa[a, b], Gam0, axes=(0, 0))
            R[a, b] = M
            R[b, a] = -M
    return R


def curvature_at_point(chart, u, conn=None, h_curv=None, h_fd=None,
                       tol=DEFAULT_TOLERANCES, pairs="all",
                       with_dtau=True, dtau_dirs=None):
    """Curvature data at a point.

    ``pairs="horizontal"`` restricts to horizontal index pairs (enough for
    Ric, Scal, tau) and is the cheap path used when differencing tau itself.
    ``dtau_dirs`` selects which Reeb directions tau is differenced along
    (default: all three when the full slot set is computed).
    """
    if h_curv is None:
        h_curv = DEFAULT_STEPS.curv
    if h_fd is None:
        h_fd = DEFAULT_STEPS.fd
    u = np.asarray(u, dtype=float)
    if conn is None:
        conn = connection_at_point(chart, u, h=h_fd, tol=tol)
    jet = conn.jet
    frame = conn.frame
    fourn = frame.fourn
    m = chart.m
    pivots = frame.pivot_order

    directions = range(fourn) if pairs == "horizontal" else range(m)

    Gam0 = conn.stacked_matrices()
    dGam = np.zeros((m, m, fourn, fourn))
    for a in directions:
        v = jet.field_value(a)
        plus = _connection_matrices(chart, u + h_curv * v, pivots, h_fd, tol)
        minus = _connection_matrices(chart, u - h_curv * v, pivots, h_fd, tol)
        dGam[a] = (plus - minus) / (2.0 * h_curv)

    kappa = jet.structure_functions()
    R = _assemble_curvature(Gam0, dGam, kappa, directions)

    Ric = np.einsum("babc->ac", R[:fourn, :fourn, :, :])
    Scal = float(np.trace(Ric))
    tau = Scal / (16.0 * chart.n * (chart.n + 2))

    rho = np.zeros((3, m, m))
    for s in range(3):
        for a in directions:
            for b in directions:
                if b <= a:
                    continue
                val = endo_inner(frame.I[s], R[a, b])
                rho[s, a, b] = val
                rho[s, b, a] = -val

    skew_res = 0.0
    for a in directions:
        for b in directions:
            if b <= a:
                continue
            skew_res = max(skew_res, np.abs(R[a, b] + R[a, b].T).max())

    if dtau_dirs is None:
        dtau_dirs = (0, 1, 2) if (with_dtau and pairs == "all") else ()
    dtau_xi = None
    if dtau_dirs:
        dtau_xi = np.zeros(3)
        for s in dtau_dirs:
            v = frame.xi[:, s]
            tp = scal_at(chart, u + h_curv * v, pivots, h_curv, h_fd, tol)
            tm = scal_at(chart, u - h_curv * v, pivots, h_curv, h_fd, tol)
            dtau_xi[s] = (tp - tm) / (2.0 * h_curv) / (16.0 * chart.n * (chart.n + 2))

    diagnostics = {"curvature_metricity": float(skew_res)}
    return CurvatureAtPoint(frame=frame, conn=conn, R=R, Ric=Ric, rho=rho,
                            Scal=Scal, tau=tau, dtau_xi=dtau_xi,
                            diagnostics=diagnostics)


def scal_at(chart, u, pivots, h_curv, h_fd, tol):
    """Scalar curvature at a (displaced) point through the horizontal-pair
    path; used for differencing tau along the Reeb directions."""
    from .chart import frame_field
    fr = frame_field(chart, u, pivot_order=pivots, tol=tol)
    jet = FrameJet(chart, u, h=h_fd, tol=tol, frame=fr)
    conn = connection_at_point(chart, u, jet=jet, tol=tol, split=False)
    curv = curvature_at_point(chart, u, conn=conn, h_curv=h_curv, h_fd=h_fd,
                              tol=tol, pairs="horizontal", with_dtau=False)
    return curv.Scal


def curvature_endo(chart, u, a_index, b_index, h_curv=None, h_fd=None,
                   tol=DEFAULT_TOLERANCES, conn=None):
    """Matrix of R(f_a, f_b)|H for a single ordered pair of frame
    directions."""
    if h_curv is None:
        h_curv = DEFAULT_STEPS.curv
    if h_fd is None:
        h_fd = DEFAULT_STEPS.fd
    u = np.asarray(u, dtype=float)
    if conn is None:
        conn = connection_at_point(chart, u, h=h_fd, tol=tol, split=False)
    jet = conn.jet
    pivots = conn.frame.pivot_order
    Gam0 = conn.stacked_matrices()

    sign = 1.0
    if a_index == b_index:
        return np.zeros_like(Gam0[0])
    if a_index > b_index:
        a_index, b_index = b_index, a_index
        sign = -1.0

    dmat = {}
    for idx in (a_index, b_index):
        v = jet.field_value(idx)
        plus = _connection_matrices(chart, u + h_curv * v, pivots, h_fd, tol)
        minus = _connection_matrices(chart, u - h_curv * v, pivots, h_fd, tol)
        dmat[idx] = (plus - minus) / (2.0 * h_curv)

    br = jet.bracket(a_index, b_index)
    hc, vc = jet.decompose(br)
    kappa_ab = np.concatenate([hc, vc])
    M = dmat[a_index][b_index] - dmat[b_index][a_index] \
        + Gam0[a_index] @ Gam0[b_index] - Gam0[b_index] @ Gam0[a_index] \
        - np.tensordot(kappa_ab, Gam0, axes=(0, 0))
    return sign * M


def step_diagnostic(chart, u, a_index, b_index, h_curv=None,
                    tol=DEFAULT_TOLERANCES, raise_on_noise=False):
    """Step-halving consistency of the curvature differencing.

    Returns (delta_h, delta_half, ratio): the change between steps h and h/2
    and between h/2 and h/4.  Second-order differencing shrinks the change
    about fourfold; a ratio collapsing towards (or below) one signals that
    rounding noise dominates."""
    if h_curv is None:
        h_curv = DEFAULT_STEPS.curv
    r_h = curvature_endo(chart, u, a_index, b_index, h_curv=h_curv, tol=tol)
    r_h2 = curvature_endo(chart, u, a_index, b_index, h_curv=h_curv / 2, tol=tol)
    r_h4 = curvature_endo(chart, u, a_index, b_index, h_curv=h_curv / 4, tol=tol)
    delta1 = float(np.abs(r_h - r_h2).max())
    delta2 = float(np.abs(r_h2 - r_h4).max())
    ratio = delta1 / delta2 if delta2 > 0 else np.inf
    if raise_on_noise and delta2 >= delta1 and delta1 > 0:
        raise StepTooSmall(
            f"curvature differencing noise-dominated: deltas {delta1:.2e} "
            f"-> {delta2:.2e} under step halving")
    return delta1, delta2, ratio


def ricci(chart, u, h_curv=None, h_fd=None, tol=DEFAULT_TOLERANCES, curv=None):
    """Ricci form restricted to H: Ric(A, B) = sum_b g(R(e_b, A)B, e_b)."""
    if curv is None:
        curv = curvature_at_point(chart, u, h_curv=h_curv, h_fd=h_fd, tol=tol,
                                  pairs="horizontal", with_dtau=False)
    return curv.Ric


def rho_scal_tau(chart, u, h_curv=None, h_fd=None, tol=DEFAULT_TOLERANCES,
                 curv=None):
    """(rho, Scal, tau, dtau along the Reeb directions)."""
    if curv is None:
        curv = curvature_at_point(chart, u, h_curv=h_curv, h_fd=h_fd, tol=tol)
    return curv.rho, curv.Scal, curv.tau, curv.dtau_xi


def vertical_form_identity_residual(alpha_vert, dxx, tau):
    """Residual of the cross-identity linking the vertical connection
    1-forms to the coframe differentials and tau:

        alpha_i(xi_s) = d eta_s(xi_j, xi_k)
                        - delta_is (tau + (1/2) sum_cyc d eta_1(xi_2, xi_3))

    ``alpha_vert[i, s]`` holds alpha_i(xi_s) and ``dxx[s, i, j]`` holds
    d eta_s(xi_i, xi_j)."""
    cyc = {0: (1, 2), 1: (2, 0), 2: (0, 1)}
    corr = tau + 0.5 * (dxx[0, 1, 2] + dxx[1, 2, 0] + dxx[2, 0, 1])
    worst = 0.0
    for i in range(3):
        j, k = cyc[i]
        for s in range(3):
            rhs = dxx[s, j, k] - (corr if i == s else 0.0)
            worst = max(worst, abs(alpha_vert[i, s] - rhs))
    return float(worst)


def alpha_identity_check(chart, u, h_curv=None, h_fd=None,
                         tol=DEFAULT_TOLERANCES, conn=None, curv=None):
    """Evaluate the vertical-form cross-identity at a point (connection alpha
    values against coframe differentials and tau)."""
    if conn is None:
        conn = connection_at_point(chart, u, h=h_fd, tol=tol)
    if curv is None:
        curv = curvature_at_point(chart, u, conn=conn, h_curv=h_curv,
                                  h_fd=h_fd, tol=tol, pairs="horizontal",
                                  with_dtau=False)
    frame = conn.frame
    fourn = frame.fourn
    alpha_vert = conn.alpha[:, fourn:]
    dxx = np.einsum("ri,srq,qj->sij", frame.xi, frame.dcoframe, frame.xi)
    return vertical_form_identity_residual(alpha_vert, dxx, curv.tau)


def ricci_decomposition_residual(curv, torsion, fourn):
    """Slotwise residual of
    Ric = (2n+2) T0 + (4n+10) U + (Scal/4n) g on H."""
    n = fourn // 4
    expected = (2 * n + 2) * torsion.T0 + (4 * n + 10) * torsion.U \
        + (curv.Scal / fourn) * np.eye(fourn)
    return float(np.abs(curv.Ric - expected).max())
