"""Finite-dimensional subspace geometry in Gram coordinates.

Everything here operates on coefficient vectors relative to an ordered list
of generator functions, with their pairwise inner products collected in a
Gram matrix ``G[i, j] = <g_i, g_j>``. The layer is field-generic: real
symmetric and complex Hermitian Grams are both accepted. The inner-product
convention is linear in the first argument and conjugate-linear in the
second (matching ``<f, g> = integral of f * conj(g)``), so for coefficient
vectors a, b the function-space inner product is ``b^H conj(G) a``; over the
reals this is the familiar ``a^T G b``. Internally the conjugate form is used
so that the real formulas stated below hold verbatim.

Three operations build on this:

* :func:`orthonormalize` — coefficients of an orthonormal basis via a
  symmetric eigendecomposition of the Gram matrix. Rank decisions are made on
  eigenvalues, so they do not depend on generator order.
* :func:`build_isomorphism` — the inner-product-preserving linear map from
  span(generators) onto a standard coordinate space of matching dimension.
  The coordinate of a function is its vector of inner products with the
  orthonormal basis; in matrix form ``embed = B^T G`` over the reals.
* :func:`principal_angles` — angles and principal vectors between two
  subspaces given by orthonormal coordinate bases, cosine SVD with a
  sine-based recomputation of the well-aligned directions so that small
  angles do not drown in round-off. :func:`principal_angles_bruteforce`
  solves the defining max-correlation recursion directly and serves as an
  independent oracle at test scale.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "DegenerateSpace",
    "NotPSD",
    "BudgetExceeded",
    "SubspaceBasis",
    "Isomorphism",
    "PrincipalDecomposition",
    "orthonormalize",
    "build_isomorphism",
    "principal_angles",
    "principal_angles_bruteforce",
]

DEFAULT_RANK_TOL = 1e-10
_NOT_PSD_TOL = 1e-8


class DegenerateSpace(ValueError):
    """All generators are numerically zero; there is no subspace to work with."""


class NotPSD(ValueError):
    """Matrix has an eigenvalue below the negative tolerance; not a Gram matrix."""


class BudgetExceeded(RuntimeError):
    """The brute-force angle search ran out of iterations before converging."""


def _entries(gram):
    entries = getattr(gram, "entries", gram)
    return np.asarray(entries)


def _coefficient_form(G):
    """The matrix H with b^H H a = <f_a, f_b>; equals G itself over the reals."""
    return G.conj() if np.iscomplexobj(G) else G


def _psd_eigh(G, rank_tol):
    """Eigendecomposition of the coefficient form, descending, rank-truncated."""
    H = _coefficient_form(G)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"Gram matrix must be square, got shape {H.shape}")
    eigenvalues, vectors = np.linalg.eigh(H)
    largest = eigenvalues[-1]
    if eigenvalues[0] < -_NOT_PSD_TOL * max(largest, 0.0):
        raise NotPSD(
            f"minimum eigenvalue {eigenvalues[0]:.3e} below tolerance "
            f"{-_NOT_PSD_TOL * max(largest, 0.0):.3e}"
        )
    if largest <= 0.0:
        raise DegenerateSpace("all generators are numerically zero")
    order = np.argsort(-eigenvalues, kind="stable")
    eigenvalues = eigenvalues[order]
    vectors = _canonical_columns(vectors[:, order])
    rank = int(np.count_nonzero(eigenvalues > rank_tol * largest))
    if rank == 0:
        raise DegenerateSpace("no eigenvalue above the rank tolerance")
    return eigenvalues[:rank], vectors[:, :rank]


def _canonical_columns(vectors):
    """Fix the sign/phase ambiguity: largest-magnitude entry made real positive."""
    leads = vectors[np.argmax(np.abs(vectors), axis=0), np.arange(vectors.shape[1])]
    if np.iscomplexobj(vectors):
        magnitude = np.abs(leads)
        factors = np.where(magnitude > 0, np.conj(leads) / np.where(magnitude > 0, magnitude, 1.0), 1.0)
    else:
        factors = np.where(leads < 0, -1.0, 1.0)
    return vectors * factors


def orthonormalize(gram, rank_tol=DEFAULT_RANK_TOL):
    """Coefficients of an orthonormal basis for the span of the generators.

    Returns ``(B, rank)`` where B has shape ``(m, rank)`` and satisfies
    ``B^T G B = I`` over the reals (conjugate form over C). Column j holds
    the generator coefficients of the j-th basis function; columns are
    ordered by descending Gram eigenvalue. The rank counts eigenvalues above
    ``rank_tol`` times the largest one.

    Raises :class:`NotPSD` for an indefinite input and
    :class:`DegenerateSpace` when every generator is numerically zero.
    """
    G = _entries(gram)
    eigenvalues, vectors = _psd_eigh(G, rank_tol)
    return vectors / np.sqrt(eigenvalues), len(eigenvalues)


@dataclass(frozen=True)
class SubspaceBasis:
    """Orthonormal columns spanning a subspace of a coordinate space."""

    coeffs: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.coeffs)
        if Q.ndim != 2:
            raise ValueError("basis must be a 2-d array of column vectors")
        object.__setattr__(self, "coeffs", Q)
        gram = Q.conj().T @ Q
        if np.max(np.abs(gram - np.eye(Q.shape[1]))) > 1e-10:
            raise ValueError("basis columns are not orthonormal")

    @property
    def ambient_dim(self):
        return self.coeffs.shape[0]

    @property
    def rank(self):
        return self.coeffs.shape[1]


@dataclass(frozen=True)
class Isomorphism:
    """Inner-product-preserving map from span(generators) to coordinates.

    ``embed_matrix`` maps a generator-coefficient vector c (the function
    ``sum_i c_i g_i``) to its coordinate vector; the standard inner product
    of two images equals the function-space inner product of the preimages
    up to the dropped (numerically null) directions.
    """

    embed_matrix: np.ndarray
    generator_labels: Optional[tuple[str, ...]] = None

    @property
    def dim(self):
        """Dimension of the coordinate space, i.e. the numerical rank of W."""
        return self.embed_matrix.shape[0]

    @property
    def n_generators(self):
        return self.embed_matrix.shape[1]

    def embed(self, coeffs):
        """Coordinates of one coefficient vector or of a matrix of columns."""
        return self.embed_matrix @ np.asarray(coeffs)


def build_isomorphism(gram, rank_tol=DEFAULT_RANK_TOL):
    """Isomorphism from the span of the generators onto standard coordinates.

    The coordinate of a function is the vector of its inner products with the
    orthonormal basis from :func:`orthonormalize`; in matrix form the real
    case reads ``embed = B^T G``.
    """
    G = _entries(gram)
    eigenvalues, vectors = _psd_eigh(G, rank_tol)
    embed = np.sqrt(eigenvalues)[:, None] * vectors.conj().T
    labels = getattr(gram, "atom_labels", None)
    return Isomorphism(embed, tuple(labels) if labels is not None else None)


@dataclass(frozen=True)
class PrincipalDecomposition:
    """Principal angles and paired principal vectors between two subspaces.

    ``angles`` is ascending in [0, pi/2], one per dimension of the smaller
    subspace. Columns ``u_vectors[:, i]`` and ``v_vectors[:, i]`` are the
    ambient-coordinate principal vectors attaining ``cos(angles[i])``, with
    phases fixed so that ``<u_i, v_i>`` is real and nonnegative. ``swapped``
    records whether the inputs were exchanged to keep dim(U) >= dim(V).
    """

    angles: np.ndarray
    u_vectors: np.ndarray
    v_vectors: np.ndarray
    dim_u: int
    dim_v: int
    swapped: bool = False

    @property
    def max_angle(self):
        return float(self.angles[-1])


def _basis_columns(basis):
    if isinstance(basis, SubspaceBasis):
        return basis.coeffs
    return np.asarray(basis)


def principal_angles(qu, qv):
    """Principal angles and vectors between two orthonormally-based subspaces.

    The cosines are the singular values of the cross matrix of the bases;
    for directions with cos^2 > 1/2 the angle is recomputed from the sine
    (singular values of the residual of one basis against the other), which
    keeps small angles accurate. Accepts :class:`SubspaceBasis` objects or
    plain arrays with orthonormal columns in the same ambient space.
    """
    U = _basis_columns(qu)
    V = _basis_columns(qv)
    if U.shape[0] != V.shape[0]:
        raise ValueError(
            f"ambient dimensions differ: {U.shape[0]} vs {V.shape[0]}"
        )
    if U.shape[1] == 0 or V.shape[1] == 0:
        raise ValueError("subspaces must have positive dimension")
    swapped = U.shape[1] < V.shape[1]
    if swapped:
        U, V = V, U
    cross = U.conj().T @ V
    left, cosines, right_h = np.linalg.svd(cross, full_matrices=False)
    cosines = np.clip(cosines, 0.0, 1.0)
    angles = np.arccos(cosines)  # ascending: singular values come descending
    aligned = cosines**2 > 0.5
    if np.any(aligned):
        residual = V - U @ cross
        sines = np.sort(np.linalg.svd(residual, compute_uv=False))
        angles[aligned] = np.arcsin(np.clip(sines[aligned], 0.0, 1.0))
    u_vectors = U @ left
    v_vectors = V @ right_h.conj().T
    u_vectors = _fix_phases(u_vectors, v_vectors)
    return PrincipalDecomposition(
        angles=angles,
        u_vectors=u_vectors,
        v_vectors=v_vectors,
        dim_u=U.shape[1],
        dim_v=V.shape[1],
        swapped=swapped,
    )


def _fix_phases(u_vectors, v_vectors):
    """Scale each u_i by a unit factor so <u_i, v_i> is real nonnegative."""
    pairing = np.sum(v_vectors.conj() * u_vectors, axis=0)
    if np.iscomplexobj(u_vectors) or np.iscomplexobj(v_vectors):
        magnitude = np.abs(pairing)
        factors = np.where(magnitude > 0, np.conj(pairing) / np.where(magnitude > 0, magnitude, 1.0), 1.0)
    else:
        factors = np.where(pairing < 0, -1.0, 1.0)
    return u_vectors * factors


def _sphere_grid(dim, resolution, rng, extra_random):
    """Directions covering the unit sphere in R^dim (antipodes are redundant)."""
    if dim == 1:
        points = np.array([[1.0]])
    elif dim == 2:
        t = np.linspace(0.0, np.pi, resolution, endpoint=False)
        points = np.column_stack([np.cos(t), np.sin(t)])
    elif dim == 3:
        t = np.linspace(0.0, np.pi, resolution)
        p = np.linspace(0.0, np.pi, resolution, endpoint=False)
        T, P = np.meshgrid(t, p, indexing="ij")
        points = np.column_stack(
            [
                (np.sin(T) * np.cos(P)).ravel(),
                (np.sin(T) * np.sin(P)).ravel(),
                np.cos(T).ravel(),
            ]
        )
    else:
        # test-scale oracle: beyond 3 dimensions use random directions only
        points = np.zeros((0, dim))
    if extra_random:
        randoms = rng.standard_normal((extra_random, dim))
        randoms /= np.linalg.norm(randoms, axis=1, keepdims=True)
        points = np.vstack([points, randoms]) if points.size else randoms
    return points


def principal_angles_bruteforce(
    qu,
    qv,
    grid_resolution=24,
    n_random_starts=40,
    max_iter=20000,
    tol=1e-13,
    seed=0,
):
    """Solve the defining max-correlation recursion for the angles directly.

    For each index the absolute correlation ``|<u, v>|`` is maximized over
    unit vectors orthogonal to the previously found ones, by alternating
    exact one-sided maximization restarted from a grid of unit directions
    plus seeded random starts. The angle of the maximizing pair is read off
    with atan2 of its sine (ambient residual norm) and cosine, which stays
    accurate for small angles where arccos of the correlation alone would
    lose half the digits. Intended as an independent oracle for
    :func:`principal_angles` on small problems (subspace dimensions <= 3).

    Returns the ascending angles. Raises :class:`BudgetExceeded` if no
    restart converges within ``max_iter`` alternations.
    """
    U = _basis_columns(qu)
    V = _basis_columns(qv)
    if np.iscomplexobj(U) or np.iscomplexobj(V):
        raise ValueError("brute-force oracle supports the real field only")
    if U.shape[1] < V.shape[1]:
        U, V = V, U
    m1, m2 = U.shape[1], V.shape[1]
    cross = U.T @ V
    rng = np.random.default_rng(seed)
    found_a = np.zeros((m1, 0))
    found_b = np.zeros((m2, 0))
    angles = []
    for _ in range(m2):

        def project_a(vec):
            return vec - found_a @ (found_a.T @ vec)

        def project_b(vec):
            return vec - found_b @ (found_b.T @ vec)

        starts = _screen_starts(
            cross, project_a, project_b,
            _sphere_grid(m1, grid_resolution, rng, n_random_starts),
        )
        best_value = 0.0
        best_pair = None
        converged_any = False
        for start in starts:
            a = start
            b = None
            value = 0.0
            previous = np.inf
            converged = False
            for _ in range(max_iter):
                b = project_b(cross.T @ a)
                norm_b = np.linalg.norm(b)
                if norm_b < 1e-15:
                    value, converged = 0.0, True
                    break
                b = b / norm_b
                a_new = project_a(cross @ b)
                norm_an = np.linalg.norm(a_new)
                if norm_an < 1e-15:
                    value, converged = 0.0, True
                    break
                a_new = a_new / norm_an
                previous = value
                value = float(a_new @ cross @ b)
                # stall on the iterate, not the value: the value converges
                # quadratically in the vector error and would stop too early
                drift = min(np.max(np.abs(a_new - a)), np.max(np.abs(a_new + a)))
                a = a_new
                if drift <= tol:
                    converged = True
                    break
            else:
                # iteration cap: accept a stalled value; the iterate then only
                # wanders inside a near-degenerate block of directions whose
                # angles are equal to within the value stall
                converged = abs(abs(value) - abs(previous)) <= 1e-12 * max(
                    1.0, abs(value)
                )
            if converged:
                converged_any = True
                if abs(value) > abs(best_value):
                    best_value = value
                    best_pair = (a.copy(), b.copy()) if value != 0.0 else None
        if not converged_any:
            raise BudgetExceeded(
                f"no restart converged within {max_iter} alternations"
            )
        if best_pair is None:
            # remaining feasible directions are fully orthogonal; all later
            # angles are pi/2 as well, but deflation needs explicit vectors
            angles.append(np.pi / 2)
            a = _first_feasible(project_a, m1)
            b = _first_feasible(project_b, m2)
        else:
            a, b = best_pair
            u_ambient = U @ a
            v_ambient = V @ b
            cosine = float(u_ambient @ v_ambient)
            sine = float(np.linalg.norm(v_ambient - cosine * u_ambient))
            angles.append(float(np.arctan2(sine, abs(cosine))))
        found_a = np.column_stack([found_a, a])
        found_b = np.column_stack([found_b, b])
    return np.array(angles)


def _screen_starts(cross, project_a, project_b, candidates, keep=6):
    """Feasible unit starts ranked by the objective after 1.5 alternations."""
    A = project_a(candidates.T)
    norms = np.linalg.norm(A, axis=0)
    A = A[:, norms > 1e-10] / norms[norms > 1e-10]
    if A.shape[1] == 0:
        return []
    B = project_b(cross.T @ A)
    b_norms = np.linalg.norm(B, axis=0)
    safe = np.where(b_norms > 1e-15, b_norms, 1.0)
    scores = np.linalg.norm(project_a(cross @ (B / safe)), axis=0)
    scores = np.where(b_norms > 1e-15, scores, 0.0)
    order = np.argsort(-scores, kind="stable")[:keep]
    return [A[:, j] for j in order]


def _first_feasible(projector, dim):
    for k in range(dim):
        candidate = projector(np.eye(dim)[:, k])
        norm = np.linalg.norm(candidate)
        if norm > 1e-10:
            return candidate / norm
    raise BudgetExceeded("deflated feasible set is empty")
