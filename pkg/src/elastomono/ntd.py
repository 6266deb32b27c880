"""Discrete Neumann-to-Dirichlet matrices, their linearization and noise."""

from __future__ import annotations

import hashlib
import threading
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .fem import ForwardSolution, LameField, assemble, element_parts, load_matrix, solve_loadcases
from .geometry import PatchLayout, PixelPartition

SYMMETRY_TOL = 1e-8


class SymmetryError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class NtdMatrix:
    values: np.ndarray
    symmetry_defect: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def M(self) -> int:
        return self.values.shape[0]

    @property
    def fro(self) -> float:
        return float(np.linalg.norm(self.values, "fro"))

    def __add__(self, other):
        return NtdMatrix(self.values + _values(other))

    def __sub__(self, other):
        return NtdMatrix(self.values - _values(other))

    def to_csv(self, path, header: str | None = None) -> None:
        write_matrix_csv(path, self.values, header)


def _values(a):
    return a.values if isinstance(a, NtdMatrix) else np.asarray(a)


def matrix_csv_text(values: np.ndarray, header: str | None = None) -> str:
    """Row-major CSV, full precision, optional ``#`` comment header."""
    lines = [f"# {h}" for h in header.splitlines()] if header else []
    lines += [",".join(f"{x:.17e}" for x in row) for row in np.atleast_2d(values)]
    return "\n".join(lines) + "\n"


def write_matrix_csv(path, values: np.ndarray, header: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(matrix_csv_text(values, header))


def read_matrix_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", comments="#", ndmin=2)


def displacement_matrix(solutions: list[ForwardSolution]) -> np.ndarray:
    ordered = sorted(solutions, key=lambda s: s.load_case)
    return np.column_stack([s.displacement for s in ordered])


def symmetrize(a: np.ndarray) -> tuple[np.ndarray, float]:
    norm = np.linalg.norm(a, "fro")
    defect = float(np.linalg.norm(a - a.T, "fro") / norm) if norm > 0 else 0.0
    return 0.5 * (a + a.T), defect


def assemble_ntd(solutions: list[ForwardSolution], layout: PatchLayout, loads: np.ndarray | None = None) -> NtdMatrix:
    """Entry ``(l, k)`` is the facet quadrature of ``g_l · u^(k)`` over patch ``l``."""
    if len(solutions) != layout.M:
        raise ValueError(f"expected {layout.M} solutions, got {len(solutions)}")
    if loads is None:
        loads = load_matrix(layout)
    raw = loads.T @ displacement_matrix(solutions)
    sym, defect = symmetrize(raw)
    if defect > SYMMETRY_TOL:
        raise SymmetryError(f"NtD symmetry defect {defect:.3e} exceeds {SYMMETRY_TOL:g}")
    return NtdMatrix(sym, defect)


def assemble_derivative_increment(
    background_solutions,
    partition: PixelPartition,
    region,
    kappa_lam: float,
    kappa_mu: float,
) -> NtdMatrix:
    """Linearized NtD increment for the direction ``(kappa_lam, kappa_mu) * chi_region``.

    ``background_solutions`` is a list of :class:`ForwardSolution` or an
    already stacked ``(n_dofs, M)`` displacement matrix.
    """
    U = background_solutions
    if not isinstance(U, np.ndarray):
        U = displacement_matrix(U)
    mesh = partition.mesh
    elems = partition.elements_of(region)
    k_lam, k_mu = element_parts(mesh.h)
    ke = kappa_lam * k_lam + kappa_mu * k_mu
    ue = U[mesh.element_dofs[elems]]  # (ne, 24, M)
    inc = -np.einsum("eim,ij,ejk->mk", ue, ke, ue, optimize=True)
    return NtdMatrix(0.5 * (inc + inc.T))


@dataclass(frozen=True, eq=False)
class NoiseRealization:
    seed: int
    eta: float
    delta: float
    perturbation: np.ndarray
    noisy: NtdMatrix


def add_noise(ntd: NtdMatrix, eta: float, seed: int, reference_norm: float | None = None) -> NoiseRealization:
    """Perturb ``ntd`` by ``delta * E_sym`` with ``||E_sym||_F = 1``.

    ``delta = eta * reference_norm``; the reference defaults to
    ``||ntd||_F``. ``E`` is i.i.d. uniform on ``[-1, 1]``, symmetrized and
    renormalized.
    """
    if not eta >= 0:
        raise ValueError(f"noise level must be nonnegative, got {eta!r}")
    ref = ntd.fro if reference_norm is None else float(reference_norm)
    delta = eta * ref
    rng = np.random.default_rng(seed)
    e = rng.uniform(-1.0, 1.0, size=(ntd.M, ntd.M))
    e = e / np.linalg.norm(e, "fro")
    e = 0.5 * (e + e.T)
    e = e / np.linalg.norm(e, "fro")
    if delta == 0:
        noisy = NtdMatrix(ntd.values)
    else:
        noisy = NtdMatrix(ntd.values + delta * e)
    return NoiseRealization(int(seed), float(eta), float(delta), delta * e, noisy)


@dataclass(frozen=True, eq=False)
class SolveSet:
    field: LameField
    solutions: list[ForwardSolution]
    displacements: np.ndarray
    ntd: NtdMatrix


class ForwardModel:
    """Mesh + patch layout with a bounded cache of solve sets keyed by field content.

    Safe to share between threads; cached results are immutable.
    """

    def __init__(self, layout: PatchLayout, cache_size: int = 4096):
        self.layout = layout
        self.mesh = layout.mesh
        self.loads = load_matrix(layout)
        self._cache: OrderedDict[str, SolveSet] = OrderedDict()
        self._cache_size = cache_size
        self._lock = threading.Lock()

    @property
    def M(self) -> int:
        return self.layout.M

    def solve(self, field: LameField) -> SolveSet:
        key = hashlib.sha256(field.key()).hexdigest()
        with self._lock:
            hit = self._cache.get(key)
            if hit is not None:
                self._cache.move_to_end(key)
                return hit
        system = assemble(self.mesh, field)
        sols = solve_loadcases(system, self.layout)
        result = SolveSet(field, sols, displacement_matrix(sols), assemble_ntd(sols, self.layout, self.loads))
        with self._lock:
            self._cache[key] = result
            while len(self._cache) > self._cache_size:
                self._cache.popitem(last=False)
        return result

    def ntd(self, field: LameField) -> NtdMatrix:
        return self.solve(field).ntd

    def constant_field(self, lam: float, mu: float) -> LameField:
        return LameField.constant(self.mesh.n_elements, lam, mu)
