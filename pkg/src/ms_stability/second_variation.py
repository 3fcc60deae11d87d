"""Second-variation quadratic form and its spectral stability test.

For a curve perturbation phi the quadratic form splits as

    d2F[phi] = ||phi||~^2 - (T phi, phi)~

where ||.||~ is the curve scalar product (tangential stiffness plus a
squared-curvature mass term) and T is the compact nonlocal operator
obtained by solving the jump-transport problem for phi and pairing the
resulting bulk field back against the curve.  Strict stability of the
critical pair is equivalent to lambda_1(T) < 1, and dually to mu > 1
where mu minimizes twice the bulk energy over fields whose induced
perturbation has unit curve norm.

Both eigenvalues are computed matrix-free with power iterations that
share the assembled stiffness, coupling, and Gram matrices.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import elliptic, geometry
from .errors import DegeneratePencil, GramSingular, InvalidRestriction, NoConvergence

DEFAULT_SEED = 1729
RESTRICTIONS = ("mean_zero", "endpoint_zero", "none")


def _restriction_basis(kind, restriction, weights):
    """Orthonormal basis (columns) of the admissible perturbation subspace."""
    m = weights.size
    if restriction == "none":
        return np.eye(m)
    if restriction == "mean_zero":
        # Orthogonal complement of the quadrature weight vector: full QR of
        # the single column gives a deterministic orthonormal completion.
        q, _ = np.linalg.qr(weights.reshape(-1, 1), mode="complete")
        return q[:, 1:]
    if restriction == "endpoint_zero":
        if kind == "strip":
            keep = np.arange(1, m)  # the period seam x = 0 is the endpoint
        else:
            keep = np.arange(1, m - 1)
        basis = np.zeros((m, keep.size))
        basis[keep, np.arange(keep.size)] = 1.0
        return basis
    raise InvalidRestriction(
        "unknown restriction %r; expected one of %s" % (restriction, (RESTRICTIONS,))
    )


@dataclass
class TildeGram:
    """Curve scalar product matrix with an optional subspace restriction.

    matrix is the full m x m form; basis holds orthonormal columns
    spanning the restricted subspace, and the reduced matrix is factored
    lazily on first inverse application (raising GramSingular if the
    form fails to be positive definite there).
    """

    kind: str
    matrix: np.ndarray
    weights: np.ndarray
    restriction: str
    basis: np.ndarray
    _reduced: np.ndarray = field(default=None, repr=False)
    _chol: tuple = field(default=None, repr=False)

    @property
    def size(self):
        return self.matrix.shape[0]

    def form(self, phi):
        """Quadratic form ||phi||~^2 of an arbitrary perturbation."""
        phi = np.asarray(phi, dtype=float)
        return float(phi @ self.matrix @ phi)

    def inner(self, phi, psi):
        return float(np.asarray(phi) @ self.matrix @ np.asarray(psi))

    def norm(self, phi):
        val = self.form(phi)
        return math.sqrt(max(val, 0.0))

    def project(self, vec):
        """Euclidean projection onto the restriction subspace."""
        return self.basis @ (self.basis.T @ np.asarray(vec, dtype=float))

    def _factorize(self):
        if self._chol is None:
            self._reduced = self.basis.T @ self.matrix @ self.basis
            try:
                chol = scipy.linalg.cho_factor(self._reduced)
            except scipy.linalg.LinAlgError as exc:
                raise GramSingular(
                    "scalar product is not positive definite under "
                    "restriction %r" % self.restriction
                ) from exc
            # Cholesky can numerically succeed on a singular form (the
            # zero pivot lands on rounding noise); reject those too.
            pivots = np.abs(np.diag(chol[0]))
            if pivots.size and (pivots.min() / pivots.max()) ** 2 < 1e-12:
                raise GramSingular(
                    "scalar product is numerically singular under "
                    "restriction %r" % self.restriction
                )
            self._chol = chol
        return self._chol

    def apply_inverse(self, rhs):
        """Solve (G y, .) = rhs on the subspace; returns y as a full vector."""
        chol = self._factorize()
        reduced = scipy.linalg.cho_solve(chol, self.basis.T @ np.asarray(rhs, float))
        return self.basis @ reduced


def assemble_tilde_gram(config, restriction=None, m=None):
    """Build the curve scalar product for a strip curve or a segment.

    config is a GraphCurve (periodic strip case: tangential P1 stiffness
    on arclength plus the squared-curvature mass by trapezoid weights)
    or a SegmentConfig (P1 stiffness on [0, L] minus the endpoint
    curvature terms; m is the node count, default 128).  Default
    restriction is mean_zero for the strip and none for the segment.
    """
    if isinstance(config, geometry.GraphCurve):
        if restriction is None:
            restriction = "mean_zero"
        curve = config
        ell = geometry.element_lengths(curve)
        weights = geometry.nodal_arclengths(curve)
        mm = curve.m
        mat = np.zeros((mm, mm))
        i = np.arange(mm)
        ip = (i + 1) % mm
        np.add.at(mat, (i, i), 1.0 / ell)
        np.add.at(mat, (ip, ip), 1.0 / ell)
        np.add.at(mat, (i, ip), -1.0 / ell)
        np.add.at(mat, (ip, i), -1.0 / ell)
        h_curv = geometry.curvature(curve)
        mat[i, i] += h_curv * h_curv * weights
        basis = _restriction_basis("strip", restriction, weights)
        return TildeGram("strip", mat, weights, restriction, basis)

    if isinstance(config, geometry.SegmentConfig):
        if restriction is None:
            restriction = "none"
        if m is None:
            m = 128
        if m < 8:
            raise ValueError("segment needs at least 8 nodes")
        h = config.length / (m - 1)
        main = np.full(m, 2.0 / h)
        main[0] = main[-1] = 1.0 / h
        mat = np.diag(main) + np.diag(np.full(m - 1, -1.0 / h), 1) \
            + np.diag(np.full(m - 1, -1.0 / h), -1)
        mat[0, 0] -= config.h1
        mat[-1, -1] -= config.h2
        weights = np.full(m, h)
        weights[0] = weights[-1] = h / 2.0
        basis = _restriction_basis("segment", restriction, weights)
        return TildeGram("segment", mat, weights, restriction, basis)

    raise TypeError("config must be a GraphCurve or a SegmentConfig")


@dataclass(frozen=True)
class ApplyInfo:
    """By-products of one operator application."""

    dual: np.ndarray          # r with (T phi, psi)~ = r . psi
    field: elliptic.SlitField
    stats: elliptic.SolveStats


class TOperator:
    """Matrix-free nonlocal operator T of the second variation.

    Applying T to a perturbation phi solves the jump-transport problem
    for phi on both components, pairs the solution back against the
    curve (giving the dual vector r), and lifts r through the restricted
    Gram inverse.  All applications reuse the same assembled systems.
    """

    def __init__(self, state, gram, rtol=elliptic.DEFAULT_RTOL):
        system = state.system
        if gram.size != system.grid.nx:
            raise ValueError("Gram size and curve sample count differ")
        self.state = state
        self.system = system
        self.gram = gram
        self.rtol = rtol
        self.coupling = elliptic.JumpCoupling(state)

    def apply(self, phi, warm=None):
        """Return (T phi, ApplyInfo); phi is projected into the subspace.

        warm, if given, is a dict reused across calls to warm-start the
        inner CG solves with the previous bulk fields.
        """
        phi = self.gram.project(np.asarray(phi, dtype=float))
        x0u = warm.get("upper") if warm else None
        x0l = warm.get("lower") if warm else None
        vfield, stats = elliptic.solve_jump_source(
            self.state, phi, rtol=self.rtol, coupling=self.coupling,
            x0_upper=x0u, x0_lower=x0l,
        )
        if warm is not None:
            warm["upper"] = vfield.unknown_vector("upper")
            warm["lower"] = vfield.unknown_vector("lower")
        dual = self.coupling.dual_vector(vfield)
        t_phi = self.gram.apply_inverse(dual)
        return t_phi, ApplyInfo(dual=dual, field=vfield, stats=stats)

    def form_value(self, phi):
        """(T phi, phi)~ for a raw (unprojected) perturbation."""
        phi = np.asarray(phi, dtype=float)
        vfield, _ = elliptic.solve_jump_source(
            self.state, phi, rtol=self.rtol, coupling=self.coupling
        )
        return float(phi @ self.coupling.dual_vector(vfield))

    def rayleigh(self, phi):
        """Rayleigh quotient (T phi, phi)~ / ||phi||~^2 of a raw phi."""
        denom = self.gram.form(phi)
        if denom <= 0.0:
            raise ValueError("phi has vanishing curve norm")
        return self.form_value(phi) / denom


@dataclass(frozen=True)
class EigenStats:
    iterations: int
    converged: bool
    change: float
    cg_iterations: int = 0
    note: str = ""


@dataclass(frozen=True)
class SecondVariationResult:
    """d2F[phi] evaluated by the direct route, with the dual cross-check.

    direct = -2 * bulk energy of v_phi + ||phi||~^2
    dual   = ||phi||~^2 - (T phi, phi)~
    The two agree up to linear-solver tolerance; value carries direct.
    """

    value: float
    direct: float
    dual: float
    mismatch: float
    stats: elliptic.SolveStats


def second_variation_value(state, gram, phi, rtol=elliptic.DEFAULT_RTOL):
    """Evaluate the second variation at a raw perturbation phi."""
    phi = np.asarray(phi, dtype=float)
    coupling = elliptic.JumpCoupling(state)
    vfield, stats = elliptic.solve_jump_source(state, phi, rtol=rtol,
                                               coupling=coupling)
    norm_sq = gram.form(phi)
    t_form = float(phi @ coupling.dual_vector(vfield))
    direct = -2.0 * elliptic.dirichlet_energy(vfield) + norm_sq
    dual = norm_sq - t_form
    mismatch = abs(direct - dual) / max(1.0, abs(direct))
    return SecondVariationResult(value=direct, direct=direct, dual=dual,
                                 mismatch=mismatch, stats=stats)


def _power_iteration(op, tol, max_iter, rng, deflate=()):
    """Largest eigenvalue of T on the restriction subspace."""
    gram = op.gram
    x = gram.project(rng.standard_normal(gram.size))
    for vec in deflate:
        x = x - gram.inner(x, vec) * vec
    nrm = gram.norm(x)
    if nrm == 0.0:
        raise GramSingular("degenerate start vector; restriction too small")
    x = x / nrm
    warm = {}
    lam_prev = None
    lam = 0.0
    cg_total = 0
    change = math.inf
    for it in range(1, max_iter + 1):
        y, info = op.apply(x, warm=warm)
        cg_total += info.stats.iterations
        lam = float(x @ info.dual)
        for vec in deflate:
            y = y - gram.inner(y, vec) * vec
        ny = gram.norm(y)
        if ny <= 1e-300:
            # T vanishes on the subspace; the spectrum is {0}.
            return 0.0, x, EigenStats(it, True, 0.0, cg_total, "operator is zero")
        if lam_prev is not None:
            change = abs(lam - lam_prev)
            if change <= tol * max(abs(lam), 1e-12):
                return lam, y / ny, EigenStats(it, True, change, cg_total)
        lam_prev = lam
        x = y / ny
    raise NoConvergence(
        "power iteration stalled at %.12g after %d steps (last change %.3g)"
        % (lam, max_iter, change),
        last_value=lam,
    )


def lambda1(op, tol=1e-8, max_iter=200, seed=None):
    """Leading eigenvalue of T by seeded power iteration.

    Stops when the Rayleigh quotient changes by less than tol relatively
    between sweeps; raises NoConvergence otherwise.
    """
    rng = np.random.default_rng(DEFAULT_SEED if seed is None else seed)
    value, _, stats = _power_iteration(op, tol, max_iter, rng)
    return value, stats


def leading_eigenvalues(op, count=2, tol=1e-8, max_iter=200, seed=None):
    """First few eigenvalues of T via power iteration with deflation."""
    rng = np.random.default_rng(DEFAULT_SEED if seed is None else seed)
    values = []
    vectors = []
    stats = []
    for _ in range(count):
        val, vec, st = _power_iteration(op, tol, max_iter, rng, deflate=vectors)
        values.append(val)
        vectors.append(vec)
        stats.append(st)
    return values, stats


def mu(op, tol=1e-8, max_iter=200, seed=None):
    """Dual stability value: minimum of twice the bulk energy over fields
    whose induced curve perturbation has unit scalar-product norm.

    Computed as the reciprocal of the top eigenvalue of the associated
    operator pencil, by alternating the jump-transport solve and its
    adjoint pairing (sharing all assembled matrices with T).  Returns
    (value, EigenStats); the value is +inf when the constraint set is
    empty (no coupling between curve and bulk).
    """
    gram = op.gram
    if op.coupling.magnitude() == 0.0:
        return math.inf, EigenStats(0, True, 0.0, 0, "empty constraint")
    rng = np.random.default_rng(DEFAULT_SEED if seed is None else seed)
    phi = gram.project(rng.standard_normal(gram.size))
    nrm = gram.norm(phi)
    if nrm == 0.0:
        raise GramSingular("degenerate start vector; restriction too small")
    vfield, st0 = elliptic.solve_jump_source(op.state, phi / nrm, rtol=op.rtol,
                                             coupling=op.coupling)
    cg_total = st0.iterations
    rho_prev = None
    rho = 0.0
    change = math.inf
    warm = {}
    for it in range(1, max_iter + 1):
        dual = op.coupling.dual_vector(vfield)
        lifted = gram.apply_inverse(dual)
        numer = float(lifted @ dual)
        denom = 2.0 * elliptic.dirichlet_energy(vfield)
        if denom <= 0.0 or numer <= 0.0:
            raise DegeneratePencil(
                "pencil iteration degenerated (energy %.3g, norm %.3g)"
                % (denom, numer)
            )
        rho = numer / denom
        if rho_prev is not None:
            change = abs(rho - rho_prev)
            if change <= tol * max(rho, 1e-12):
                return 1.0 / rho, EigenStats(it, True, change, cg_total)
        rho_prev = rho
        scale = 1.0 / math.sqrt(numer)
        vfield, st = elliptic.solve_jump_source(
            op.state, lifted * scale, rtol=op.rtol, coupling=op.coupling,
            x0_upper=warm.get("upper"), x0_lower=warm.get("lower"),
        )
        warm["upper"] = vfield.unknown_vector("upper")
        warm["lower"] = vfield.unknown_vector("lower")
        cg_total += st.iterations
    raise NoConvergence(
        "pencil iteration stalled at rho=%.12g after %d steps" % (rho, max_iter),
        last_value=rho,
    )


def verdict_from_eigenvalue(lam, band=0.02):
    """Stability verdict from lambda_1 with a marginal band around 1."""
    if lam < 1.0 - band:
        return "strictly_stable"
    if lam > 1.0 + band:
        return "unstable"
    return "marginal"


def verdict_from_min_eig(min_eig, band=0.02):
    """Segment verdict from the smallest normalized form eigenvalue."""
    if min_eig > band:
        return "strictly_stable"
    if min_eig < -band:
        return "unstable"
    return "marginal"


@dataclass(frozen=True)
class StabilityReport:
    """Outcome of a stability analysis of one critical pair."""

    kind: str                  # "strip" or "segment"
    verdict: str
    band: float
    restriction: str
    lambda1: float = None
    lambda1_stats: EigenStats = None
    mu: float = None
    mu_stats: EigenStats = None
    min_eig: float = None      # segment only
    grid_nx: int = None
    grid_ny: int = None
    sup_residual: float = None
    min_jump: float = None
    notes: tuple = ()
