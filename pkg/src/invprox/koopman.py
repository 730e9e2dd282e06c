"""The composition-operator pipeline: projected models, invariance proximity,
witness functions, sampling oracle, eigenpair residuals, and trajectory
prediction error.

Matrix convention used throughout (row convention): with an orthonormal
dictionary ``Psi`` the model matrix has entries ``K[i, j] = <K Psi_i, Psi_j>``,
so for a function ``f = v^T Psi`` the projected image is ``(K^T v)^T Psi``,
and the evaluated basis vector advances as ``Psi(T x) ~= K Psi(x)``.
Eigenfunctions of the projected operator therefore come from *left*
eigenvectors of K.

All geometric quantities live in coordinates on W = S + K(S): the generators
[Psi, Phi] (dictionary plus an orthonormal basis of the image) are embedded
isometrically into R^dim(W), where principal angles between the embedded
copies of S and K(S) are computed with standard dense linear algebra. The
worst-case relative projection error of the model over S equals the sine of
the largest of those angles, and a maximizing witness function is any
preimage of the top principal vector on the image side.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    DEFAULT_RANK_TOL,
    PrincipalDecomposition,
    SubspaceBasis,
    build_isomorphism,
    orthonormalize,
    principal_angles,
)
from .space import EmpiricalSpace, QuadratureSpace

__all__ = [
    "InconsistentSystem",
    "ZeroImage",
    "ZeroNorm",
    "FunctionVec",
    "KoopmanModel",
    "ProximityReport",
    "OracleResult",
    "InvarianceAnalysis",
    "analyze",
    "build_model",
    "invariance_proximity",
    "witness",
    "relative_error",
    "proximity_oracle",
    "residuals",
    "trajectory_error",
]

DEFAULT_QUAD_TOL = 1e-9
_ZERO_IMAGE_TOL = 1e-14


class InconsistentSystem(ArithmeticError):
    """The witness solve left a residual; signals numerical breakdown."""


class ZeroImage(ValueError):
    """The function is annihilated by the operator; relative error undefined."""


class ZeroNorm(ValueError):
    """Evaluated dictionary vector vanished along a trajectory."""


@dataclass(frozen=True)
class FunctionVec:
    """A function written as a coefficient vector over an ordered atom list."""

    coeffs: np.ndarray
    atoms: tuple

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float).reshape(-1)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "atoms", tuple(self.atoms))
        if len(self.atoms) != c.shape[0]:
            raise ValueError("one coefficient per atom required")

    def __call__(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        values = np.column_stack([np.asarray(a(pts), dtype=float) for a in self.atoms])
        return values @ self.coeffs

    def eval(self, point):
        return float(self(np.asarray(point, dtype=float).reshape(1, -1))[0])

    def __str__(self):
        terms = [f"{c!r}*({a})" for c, a in zip(self.coeffs, self.atoms) if c != 0.0]
        return " + ".join(terms) if terms else "0"


@dataclass(frozen=True)
class KoopmanModel:
    """Projected model of the composition operator on span(atoms).

    ``basis`` holds the coefficients of the orthonormalized dictionary
    (column j = coefficients of the j-th orthonormal basis function over the
    raw atoms); ``k_approx`` is the model matrix in that basis, row
    convention as described in the module docstring.
    """

    atoms: tuple
    space: object
    k_approx: np.ndarray
    basis: np.ndarray
    dynamics: object = None

    @property
    def dim(self):
        return self.k_approx.shape[0]

    def eval_basis(self, points):
        """Orthonormal basis functions evaluated at points, shape (m, dim)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        raw = np.column_stack([np.asarray(a(pts), dtype=float) for a in self.atoms])
        return raw @ self.basis

    def predict_coeffs(self, coeffs, steps=1):
        """Coefficients of the predicted image after ``steps`` applications.

        Exact coefficient arithmetic, hence linear: predicting a combination
        equals the combination of predictions.
        """
        v = np.asarray(coeffs, dtype=float).reshape(-1)
        for _ in range(steps):
            v = self.k_approx.T @ v
        return v

    def basis_function(self, j):
        return FunctionVec(self.basis[:, j], self.atoms)


@dataclass(frozen=True)
class ProximityReport:
    """Result of the invariance-proximity computation for one subspace."""

    proximity: float
    angles: np.ndarray
    dim_s: int
    dim_ks: int
    dim_w: int
    witness_coeffs: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "invariance_proximity": self.proximity,
            "principal_angles_rad": list(map(float, self.angles)),
            "dim_S": self.dim_s,
            "dim_KS": self.dim_ks,
            "dim_W": self.dim_w,
            "witness_coeffs": list(map(float, self.witness_coeffs)),
            "diagnostics": self.diagnostics,
        }


@dataclass(frozen=True)
class OracleResult:
    """Best lower bound on the worst-case relative error found by sampling."""

    max_error: float
    argmax_coeffs: np.ndarray
    n_samples: int
    n_excluded: int


def _blocks(atoms, space, dynamics):
    if isinstance(space, EmpiricalSpace):
        if dynamics is not None:
            raise ValueError(
                "empirical backend derives operator images from successor "
                "snapshots; pass dynamics=None"
            )
        return space.koopman_gram_blocks(atoms)
    return space.koopman_gram_blocks(atoms, dynamics)


class InvarianceAnalysis:
    """Coordinates of S and K(S) inside W = S + K(S), plus derived results.

    Construction runs the whole geometric pipeline: form the generators of
    the image, orthonormalize them, assemble the Gram of [Psi, Phi], embed
    into coordinates, orthonormalize the embedded copy of S, and take the
    principal decomposition. Everything else (witness, relative errors,
    eigenpair residuals, restricted operator norm) is linear algebra on the
    stored coordinate matrices. Instances are immutable in practice; methods
    have no side effects beyond caching.
    """

    def __init__(
        self,
        atoms,
        space,
        dynamics=None,
        rank_tol=DEFAULT_RANK_TOL,
        quad_tol=DEFAULT_QUAD_TOL,
        check_quadrature=True,
    ):
        self.atoms = tuple(atoms)
        if not self.atoms:
            raise ValueError("dictionary must be nonempty")
        self.space = space
        self.dynamics = dynamics
        self.rank_tol = float(rank_tol)
        self.quad_tol = float(quad_tol)
        self._warnings: list[str] = []

        g_dict, g_cross, g_image = _blocks(self.atoms, space, dynamics)
        m = len(self.atoms)

        # orthonormal basis Phi of the image subspace, in K-Psi coefficients
        self.image_basis, self.dim_ks = orthonormalize(g_image, rank_tol)
        coupling = g_cross @ self.image_basis
        gram_w = np.block(
            [[g_dict, coupling], [coupling.T, np.eye(self.dim_ks)]]
        )
        self.isomorphism = build_isomorphism(gram_w, rank_tol)
        embed = self.isomorphism.embed_matrix
        self.dim_w = embed.shape[0]

        self.dict_coords = embed[:, :m]          # columns: each raw atom
        image_coords = embed[:, m:]              # columns: each Phi_j
        self.dictionary_basis, self.dim_s = orthonormalize(g_dict, rank_tol)
        basis_coords = self.dict_coords @ self.dictionary_basis

        self.q_s = SubspaceBasis(_polish(basis_coords))
        self.q_ks = SubspaceBasis(_polish(image_coords))
        self._basis_coords_raw = basis_coords

        # coordinates of operator images: of each raw atom, and of each
        # orthonormal basis function
        self.image_map = image_coords @ (self.image_basis.T @ g_image)
        self.basis_image_map = self.image_map @ self.dictionary_basis

        self.k_approx = self.dictionary_basis.T @ g_cross.T @ self.dictionary_basis

        self.decomposition: PrincipalDecomposition = principal_angles(
            self.q_s, self.q_ks
        )
        if self.decomposition.swapped:
            # dim K(S) <= dim S always holds exactly; a numerical rank
            # decision that says otherwise leaves the witness side ambiguous
            raise InconsistentSystem(
                "numerical rank of the image exceeds the rank of the "
                "subspace; tighten rank_tol or rescale the dictionary"
            )
        self.angles = self.decomposition.angles
        self.proximity = float(np.sin(self.angles[-1]))

        if check_quadrature and isinstance(space, QuadratureSpace):
            self._check_quadrature(g_dict, g_cross, g_image)

        self._witness_coeffs = None
        self._witness_diag = {}

    # -- diagnostics ----------------------------------------------------------

    def _check_quadrature(self, g_dict, g_cross, g_image):
        """Recompute the Gram blocks at doubled order; warn on drift."""
        refined = self.space.refined(2)
        blocks_hi = _blocks(self.atoms, refined, self.dynamics)
        names = ("dictionary", "cross", "image")
        for name, low, high in zip(names, (g_dict, g_cross, g_image), blocks_hi):
            scale = max(np.max(np.abs(high)), 1e-300)
            drift = float(np.max(np.abs(high - low)) / scale)
            if drift >= self.quad_tol:
                message = (
                    f"quadrature order {self.space.order} not converged: "
                    f"{name} Gram block changes by {drift:.3e} relative at "
                    f"doubled order"
                )
                warnings.warn(message, stacklevel=3)
                self._warnings.append(message)

    def diagnostics(self):
        diag = {
            "rank_tol": self.rank_tol,
            "quad_tol": self.quad_tol,
            "warnings": list(self._warnings),
        }
        if isinstance(self.space, QuadratureSpace):
            diag["backend"] = "quadrature"
            diag["quad_order"] = self.space.order
        else:
            diag["backend"] = "empirical"
            diag["n_snapshots"] = int(self.space.n_snapshots)
        diag.update(self._witness_diag)
        return diag

    # -- derived quantities -----------------------------------------------------

    def function_coords(self, coeffs):
        """Coordinates of the function with the given raw-atom coefficients."""
        return self.dict_coords @ np.asarray(coeffs, dtype=float).reshape(-1)

    def image_coords(self, coeffs):
        """Coordinates of the operator image of the same function."""
        return self.image_map @ np.asarray(coeffs, dtype=float).reshape(-1)

    def relative_error(self, f):
        """Relative projection error of the image of ``f`` onto the subspace.

        ``f`` is a :class:`FunctionVec` over the dictionary atoms or a bare
        coefficient vector. Raises :class:`ZeroImage` when the operator
        annihilates ``f``.
        """
        coeffs = f.coeffs if isinstance(f, FunctionVec) else np.asarray(f, dtype=float)
        image = self.image_coords(coeffs)
        image_norm = np.linalg.norm(image)
        f_norm = np.linalg.norm(self.function_coords(coeffs))
        if image_norm <= _ZERO_IMAGE_TOL * max(f_norm, 1e-300):
            raise ZeroImage("operator image has numerically zero norm")
        q = self.q_s.coeffs
        projection = q @ (q.T @ image)
        return float(np.linalg.norm(image - projection) / image_norm)

    def witness(self):
        """A function in S attaining the worst-case relative error.

        Solves for dictionary coefficients whose operator image is the top
        principal vector on the image side; the minimum-norm least-squares
        solution fixes the non-uniqueness when the operator is not injective
        on S. The preimage always exists, so a residual beyond 1e-8 signals
        numerical breakdown and raises :class:`InconsistentSystem`.
        """
        if self._witness_coeffs is None:
            top = self.decomposition.v_vectors[:, -1]
            coeffs, _, _, _ = np.linalg.lstsq(self.image_map, top, rcond=None)
            solve_residual = float(np.linalg.norm(self.image_map @ coeffs - top))
            if solve_residual > 1e-8:
                raise InconsistentSystem(
                    f"witness solve residual {solve_residual:.3e} exceeds 1e-8"
                )
            error = self.relative_error(coeffs)
            self._witness_diag = {
                "witness_solve_residual": solve_residual,
                "witness_relative_error": error,
            }
            if abs(error - self.proximity) > 1e-8:
                message = (
                    f"witness relative error {error:.12e} deviates from the "
                    f"closed form {self.proximity:.12e}"
                )
                warnings.warn(message, stacklevel=2)
                self._warnings.append(message)
            self._witness_coeffs = coeffs
        return FunctionVec(self._witness_coeffs, self.atoms)

    def restricted_norm(self):
        """Largest amplification of the operator over the subspace S.

        Computed as the top singular value of the coordinate matrix sending
        orthonormal-basis coefficients to image coordinates.
        """
        return float(np.linalg.svd(self.basis_image_map, compute_uv=False)[0])

    def residuals(self):
        """Residuals of every eigenpair of the projected operator.

        Eigenfunctions come from left eigenvectors of the model matrix.
        Complex-conjugate pairs act on a two-dimensional real invariant
        subspace and share one residual; each pair is reported once, via the
        eigenvalue with nonnegative imaginary part. Rows are sorted by
        (real, imag) for reproducibility.
        """
        eigenvalues, vectors = np.linalg.eig(self.k_approx.T)
        out = []
        for i in range(eigenvalues.shape[0]):
            lam = complex(eigenvalues[i])
            if abs(lam.imag) <= 1e-12:
                lam = complex(lam.real, 0.0)
            elif lam.imag < 0:
                continue  # conjugate partner is reported instead
            v = vectors[:, i]
            v = v / np.linalg.norm(v)
            image = self.basis_image_map @ v
            model_image = lam * (self._basis_coords_raw @ v)
            denom = np.linalg.norm(self._basis_coords_raw @ v)
            out.append((lam, float(np.linalg.norm(image - model_image) / denom)))
        out.sort(key=lambda pair: (pair[0].real, pair[0].imag))
        return out

    def report(self):
        wit = self.witness()
        return ProximityReport(
            proximity=self.proximity,
            angles=self.angles.copy(),
            dim_s=self.dim_s,
            dim_ks=self.dim_ks,
            dim_w=self.dim_w,
            witness_coeffs=wit.coeffs.copy(),
            diagnostics=self.diagnostics(),
        )


def _polish(columns):
    """Re-orthonormalize embedded basis columns if round-off degraded them."""
    gram = columns.T @ columns
    if np.max(np.abs(gram - np.eye(columns.shape[1]))) <= 1e-12:
        return columns
    q, r = np.linalg.qr(columns)
    return q * np.where(np.diag(r) < 0, -1.0, 1.0)


def analyze(atoms, space, dynamics=None, **kwargs):
    """Build an :class:`InvarianceAnalysis`; see the class for options."""
    return InvarianceAnalysis(atoms, space, dynamics, **kwargs)


def build_model(atoms, space, dynamics=None, rank_tol=DEFAULT_RANK_TOL):
    """Projected-operator model on span(atoms).

    Orthonormalizes the dictionary and fills the model matrix with inner
    products of operator images against the orthonormal basis. Works with a
    quadrature backend plus dynamics map, or an empirical backend alone.
    """
    atoms = tuple(atoms)
    if not atoms:
        raise ValueError("dictionary must be nonempty")
    g_dict, g_cross, _ = _blocks(atoms, space, dynamics)
    basis, _ = orthonormalize(g_dict, rank_tol)
    k_approx = basis.T @ g_cross.T @ basis
    return KoopmanModel(
        atoms=atoms,
        space=space,
        k_approx=k_approx,
        basis=basis,
        dynamics=dynamics,
    )


def invariance_proximity(
    atoms,
    space,
    dynamics=None,
    rank_tol=DEFAULT_RANK_TOL,
    quad_tol=DEFAULT_QUAD_TOL,
    check_quadrature=True,
):
    """Worst-case relative projection error of the model on span(atoms).

    Returns a :class:`ProximityReport` with the value (the sine of the
    largest principal angle between the subspace and its operator image),
    all principal angles, subspace dimensions, the witness coefficients, and
    diagnostics.
    """
    analysis = InvarianceAnalysis(
        atoms,
        space,
        dynamics,
        rank_tol=rank_tol,
        quad_tol=quad_tol,
        check_quadrature=check_quadrature,
    )
    return analysis.report()


def witness(analysis):
    """Maximizing function of the relative-error supremum; see the method."""
    return analysis.witness()


def relative_error(f, analysis):
    """Relative projection error of the image of ``f``; see the method."""
    return analysis.relative_error(f)


def proximity_oracle(
    atoms,
    space,
    dynamics=None,
    n_samples=10000,
    seed=0,
    refine_steps=200,
    rank_tol=DEFAULT_RANK_TOL,
    analysis=None,
):
    """Validate the closed form from below by seeded sphere sampling.

    Draws ``n_samples`` coefficient vectors uniformly from the unit sphere of
    the orthonormalized subspace, evaluates the relative projection error of
    each image, and refines the best sample by projected gradient ascent with
    central finite differences (initial step 1e-3, halved on failure). By
    construction no sample can exceed the closed-form value.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    if analysis is None:
        analysis = InvarianceAnalysis(
            atoms, space, dynamics, rank_tol=rank_tol, check_quadrature=False
        )
    a_k = analysis.basis_image_map
    q = analysis.q_s.coeffs
    rank = a_k.shape[1]

    def error_of(unit_coeffs):
        image = a_k @ unit_coeffs
        norm = np.linalg.norm(image)
        if norm <= _ZERO_IMAGE_TOL:
            return None
        return float(np.linalg.norm(image - q @ (q.T @ image)) / norm)

    rng = np.random.default_rng(seed)
    samples = rng.standard_normal((n_samples, rank))
    samples /= np.linalg.norm(samples, axis=1, keepdims=True)
    images = a_k @ samples.T
    norms = np.linalg.norm(images, axis=0)
    valid = norms > _ZERO_IMAGE_TOL
    n_excluded = int(np.count_nonzero(~valid))
    if not np.any(valid):
        # operator annihilates every sampled function; report zero error
        best = samples[0]
        best_error = 0.0
    else:
        residual = images - q @ (q.T @ images)
        errors = np.where(
            valid, np.linalg.norm(residual, axis=0) / np.where(valid, norms, 1.0), -1.0
        )
        index = int(np.argmax(errors))
        best = samples[index].copy()
        best_error = float(errors[index])
        best, best_error = _refine(error_of, best, best_error, refine_steps)
    raw_coeffs = analysis.dictionary_basis @ best
    return OracleResult(
        max_error=best_error,
        argmax_coeffs=raw_coeffs,
        n_samples=n_samples,
        n_excluded=n_excluded,
    )


def _refine(error_of, point, value, max_steps, step=1e-3, fd_step=1e-6):
    """Projected gradient ascent on the unit sphere, shrink-on-fail."""
    n = point.shape[0]
    for _ in range(max_steps):
        gradient = np.zeros(n)
        for i in range(n):
            bump = np.zeros(n)
            bump[i] = fd_step
            up = (point + bump) / np.linalg.norm(point + bump)
            down = (point - bump) / np.linalg.norm(point - bump)
            e_up, e_down = error_of(up), error_of(down)
            if e_up is None or e_down is None:
                return point, value
            gradient[i] = (e_up - e_down) / (2 * fd_step)
        gradient -= (gradient @ point) * point
        norm = np.linalg.norm(gradient)
        if norm < 1e-14:
            break
        candidate = point + step * gradient / norm
        candidate /= np.linalg.norm(candidate)
        cand_value = error_of(candidate)
        if cand_value is not None and cand_value > value:
            point, value = candidate, cand_value
        else:
            step *= 0.5
            if step < 1e-12:
                break
    return point, value


def residuals(analysis):
    """Eigenpair residuals of the projected operator; see the method."""
    return analysis.residuals()


def trajectory_error(model, dynamics, x0, horizon):
    """Percent prediction errors along one trajectory, steps 1..horizon.

    The truth is the orthonormalized dictionary evaluated on the simulated
    trajectory; the prediction advances the initial evaluation with the model
    matrix. Errors are Euclidean norms of evaluated vectors, in percent. The
    error at step 0 is identically zero and not reported.
    """
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    state = np.asarray(x0, dtype=float).reshape(1, -1)
    prediction = model.eval_basis(state)[0]
    errors = np.empty(horizon)
    for k in range(1, horizon + 1):
        state = np.atleast_2d(dynamics(state))
        prediction = model.k_approx @ prediction
        truth = model.eval_basis(state)[0]
        truth_norm = np.linalg.norm(truth)
        if truth_norm < 1e-14:
            raise ZeroNorm(f"evaluated dictionary vanished at step {k}")
        errors[k - 1] = 100.0 * np.linalg.norm(truth - prediction) / truth_norm
    return errors
