"""Trilinear hexahedral finite elements for isotropic linear elasticity.

The bilinear form is ``int 2 mu sym(grad u) : sym(grad v) + lam div u div v``
with piecewise-constant Lamé parameters (one value per element). Dofs are
node-major: dof ``3 * node + c`` is displacement component ``c``.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import HEX_CORNERS, CubeMesh, Patch, PatchLayout

GAUSS_1D = np.array([-1.0, 1.0]) / np.sqrt(3.0)
SOLVER_RTOL = 1e-10
DIRECT_SOLVER_MAX_DOFS = 200_000


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class LameField:
    """Per-element Lamé parameters ``lam`` and ``mu``.

    ``lam = 0`` is admitted: with ``mu > 0`` the form stays coercive, which
    the 100 % background-error case of ``lam`` relies on.
    """

    lam: np.ndarray
    mu: np.ndarray

    def __post_init__(self):
        lam = np.ascontiguousarray(self.lam, dtype=float)
        mu = np.ascontiguousarray(self.mu, dtype=float)
        if lam.shape != mu.shape or lam.ndim != 1:
            raise ValueError("lam and mu must be 1-d arrays of equal length")
        if np.any(lam < 0) or np.any(mu <= 0) or not np.all(np.isfinite(lam + mu)):
            raise ValueError("Lamé field must satisfy lam >= 0 and mu > 0 elementwise")
        lam.setflags(write=False)
        mu.setflags(write=False)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "mu", mu)

    @classmethod
    def constant(cls, n_elements: int, lam: float, mu: float) -> "LameField":
        return cls(np.full(n_elements, float(lam)), np.full(n_elements, float(mu)))

    def __len__(self):
        return len(self.lam)

    def scaled(self, t: float) -> "LameField":
        return LameField(t * self.lam, t * self.mu)

    def key(self) -> bytes:
        """Content key, stable across runs."""
        return self.lam.tobytes() + self.mu.tobytes()


def _shape_gradients(xi: np.ndarray) -> np.ndarray:
    """Reference gradients ``(8, 3)`` of the trilinear shape functions."""
    signs = 2.0 * HEX_CORNERS - 1.0
    factors = 1.0 + signs * xi  # (8, 3)
    grads = np.empty((8, 3))
    for d in range(3):
        others = [c for c in range(3) if c != d]
        grads[:, d] = 0.125 * signs[:, d] * factors[:, others[0]] * factors[:, others[1]]
    return grads


def strain_operators(h: float):
    """Per Gauss point ``(B, div, weight)`` for a cube element of side ``h``.

    ``B`` is ``(6, 24)`` with rows ``(e11, e22, e33, √2 e12, √2 e13, √2 e23)``
    so that ``B u · B v = sym(grad u) : sym(grad v)``.
    """
    r = 1.0 / np.sqrt(2.0)
    detj = (h / 2.0) ** 3
    out = []
    for xk in GAUSS_1D:
        for xj in GAUSS_1D:
            for xi in GAUSS_1D:
                dn = _shape_gradients(np.array([xi, xj, xk])) * (2.0 / h)
                B = np.zeros((6, 24))
                B[0, 0::3] = dn[:, 0]
                B[1, 1::3] = dn[:, 1]
                B[2, 2::3] = dn[:, 2]
                B[3, 0::3], B[3, 1::3] = r * dn[:, 1], r * dn[:, 0]
                B[4, 0::3], B[4, 2::3] = r * dn[:, 2], r * dn[:, 0]
                B[5, 1::3], B[5, 2::3] = r * dn[:, 2], r * dn[:, 1]
                div = np.zeros(24)
                div[0::3], div[1::3], div[2::3] = dn[:, 0], dn[:, 1], dn[:, 2]
                out.append((B, div, detj))
    return out


@lru_cache(maxsize=None)
def _unit_element_parts() -> tuple[np.ndarray, np.ndarray]:
    k_lam = np.zeros((24, 24))
    k_mu = np.zeros((24, 24))
    for B, div, w in strain_operators(1.0):
        k_lam += w * np.outer(div, div)
        k_mu += w * 2.0 * B.T @ B
    return k_lam, k_mu


def element_parts(h: float) -> tuple[np.ndarray, np.ndarray]:
    """The ``lam``- and ``mu``-coefficient matrices; stiffness is linear in both."""
    k_lam, k_mu = _unit_element_parts()
    return h * k_lam, h * k_mu


def element_stiffness(lam: float, mu: float, h: float) -> np.ndarray:
    if not (lam > 0 and mu > 0 and h > 0):
        raise ValueError("element stiffness needs lam > 0, mu > 0, h > 0")
    k_lam, k_mu = element_parts(h)
    return lam * k_lam + mu * k_mu


def assemble_form(mesh: CubeMesh, lam_coeff, mu_coeff) -> sp.csr_matrix:
    """Full (unconstrained) matrix of the elasticity form for arbitrary,
    possibly signed, per-element coefficients."""
    lam_coeff = np.broadcast_to(np.asarray(lam_coeff, dtype=float), (mesh.n_elements,))
    mu_coeff = np.broadcast_to(np.asarray(mu_coeff, dtype=float), (mesh.n_elements,))
    k_lam, k_mu = element_parts(mesh.h)
    blocks = lam_coeff[:, None, None] * k_lam + mu_coeff[:, None, None] * k_mu
    edofs = mesh.element_dofs
    rows = np.repeat(edofs, 24, axis=1).ravel()
    cols = np.tile(edofs, (1, 24)).ravel()
    mat = sp.coo_matrix((blocks.ravel(), (rows, cols)), shape=(mesh.n_dofs, mesh.n_dofs))
    return mat.tocsr()


@dataclass(eq=False)
class StiffnessSystem:
    """Stiffness matrix restricted to the free (non-Dirichlet) dofs.

    The factorization is built on first use and shared by every later solve.
    """

    mesh: CubeMesh
    field: LameField
    matrix: sp.csc_matrix
    free: np.ndarray
    _factor: object = field(default=None, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def n_free(self) -> int:
        return len(self.free)

    def restrict(self, full: np.ndarray) -> np.ndarray:
        return full[self.free]

    def extend(self, reduced: np.ndarray) -> np.ndarray:
        shape = (self.mesh.n_dofs,) + reduced.shape[1:]
        out = np.zeros(shape)
        out[self.free] = reduced
        return out

    def _solver(self):
        with self._lock:
            if self._factor is None:
                if self.n_free <= DIRECT_SOLVER_MAX_DOFS:
                    lu = spla.splu(
                        self.matrix,
                        permc_spec="MMD_AT_PLUS_A",
                        diag_pivot_thresh=0.0,
                        options={"SymmetricMode": True},
                    )
                    self._factor = lu.solve
                else:
                    self._factor = self._cg
            return self._factor

    def _cg(self, rhs: np.ndarray) -> np.ndarray:
        inv_diag = 1.0 / self.matrix.diagonal()
        precond = spla.LinearOperator(self.matrix.shape, matvec=lambda x: inv_diag * x)
        cols = rhs.reshape(len(rhs), -1)
        out = np.zeros_like(cols)
        for j in range(cols.shape[1]):
            if not np.any(cols[:, j]):
                continue
            x, info = spla.cg(self.matrix, cols[:, j], rtol=SOLVER_RTOL, atol=0.0, M=precond, maxiter=20 * self.n_free)
            if info != 0:
                res = np.linalg.norm(cols[:, j] - self.matrix @ x) / np.linalg.norm(cols[:, j])
                raise SolverError(f"CG did not converge (relative residual {res:.3e})")
            out[:, j] = x
        return out.reshape(rhs.shape)

    def solve(self, rhs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Solve for reduced right-hand side(s); returns ``(x, relative residuals)``."""
        rhs = np.asarray(rhs, dtype=float)
        x = self._solver()(rhs)
        r = rhs - self.matrix @ x
        num = np.linalg.norm(r.reshape(len(r), -1), axis=0)
        den = np.linalg.norm(rhs.reshape(len(rhs), -1), axis=0)
        res = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
        if np.any(res > SOLVER_RTOL) or not np.all(np.isfinite(x)):
            raise SolverError(f"solve failed: max relative residual {np.max(res):.3e}")
        return x, res


def assemble(mesh: CubeMesh, lame: LameField) -> StiffnessSystem:
    if len(lame) != mesh.n_elements:
        raise ValueError(f"field has {len(lame)} entries, mesh has {mesh.n_elements} elements")
    full = assemble_form(mesh, lame.lam, lame.mu)
    free = mesh.free_dofs()
    reduced = full[free][:, free]
    # exact symmetry: round-off in the COO summation order is symmetric already,
    # averaging removes any residual asymmetry from the sparse slicing
    reduced = ((reduced + reduced.T) * 0.5).tocsc()
    reduced.sort_indices()
    return StiffnessSystem(mesh, lame, reduced, free)


# 2x2 Gauss on the reference facet [-1, 1]^2, bilinear shape values (4 points x 4 nodes)
_FACET_SHAPES = np.array(
    [
        [(1 - a) * (1 - b), (1 + a) * (1 - b), (1 + a) * (1 + b), (1 - a) * (1 + b)]
        for b in GAUSS_1D
        for a in GAUSS_1D
    ]
) / 4.0


def patch_load(mesh: CubeMesh, patch: Patch) -> np.ndarray:
    """Consistent nodal load of a constant traction on one patch (full dof vector)."""
    detj = (mesh.h / 2.0) ** 2
    nodal = _FACET_SHAPES.sum(axis=0) * detj  # weights are all 1
    load = np.zeros(mesh.n_dofs)
    contrib = np.einsum("a,c->ac", nodal, patch.traction)  # (4, 3)
    for c in range(3):
        np.add.at(load, 3 * patch.quads + c, np.broadcast_to(contrib[:, c], patch.quads.shape))
    return load


def load_matrix(layout: PatchLayout) -> np.ndarray:
    """``(n_dofs, M)`` matrix whose column ``l`` is the load of patch ``l``."""
    return np.column_stack([patch_load(layout.mesh, p) for p in layout.patches])


@dataclass(frozen=True, eq=False)
class ForwardSolution:
    displacement: np.ndarray
    load_case: int
    residual: float


def solve_loadcases(system: StiffnessSystem, layout: PatchLayout) -> list[ForwardSolution]:
    if layout.mesh is not system.mesh and layout.mesh.n != system.mesh.n:
        raise ValueError("layout and system belong to different meshes")
    loads = load_matrix(layout)
    x, res = system.solve(system.restrict(loads))
    u = system.extend(x)
    return [ForwardSolution(u[:, k], k, float(res[k])) for k in range(layout.M)]
