"""A priori resolution guarantees and maximal-noise maps."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .geometry import PixelPartition
from .monotests import (
    LINEARIZED,
    STANDARD,
    MaterialSpec,
    background_solveset,
    linearized_reference,
    test_field_tau,
)
from .ntd import ForwardModel

# theorem tag -> (method, direction)
THEOREMS = {
    "T4.1": (STANDARD, "stiffer"),
    "T4.2": (STANDARD, "softer"),
    "T4.3": (LINEARIZED, "stiffer"),
    "T4.4": (LINEARIZED, "softer"),
}


def theorem_for(method: str, direction: str) -> str:
    for tag, key in THEOREMS.items():
        if key == (method, direction):
            return tag
    raise ValueError(f"no theorem for method={method!r}, direction={direction!r}")


@dataclass(frozen=True, eq=False)
class GuaranteeReport:
    theorem: str
    nu: float
    per_pixel: np.ndarray
    reference_norm: float
    reference_choice: str = "background"
    spectra: list[np.ndarray] = field(default_factory=list, repr=False)

    @property
    def stiffer(self) -> bool:
        return THEOREMS[self.theorem][1] == "stiffer"

    @property
    def delta_max(self) -> float:
        """Supremum of certifiable noise levels (not attained)."""
        if self.stiffer:
            return -self.nu / 2 if self.nu < 0 else 0.0
        return self.nu / 2 if self.nu > 0 else 0.0

    @property
    def eta_max(self) -> float:
        return self.delta_max / self.reference_norm


def certify(report: GuaranteeReport, delta: float) -> bool:
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if report.stiffer:
        return report.nu < -2 * delta
    # T4.4 is stated with 2*delta > 0; delta = 0 is still gated by nu > 0 here
    return report.nu > 2 * delta


def _reference_norm(spec: MaterialSpec, model: ForwardModel, reference_norm: float | None):
    if reference_norm is not None:
        return float(reference_norm), "supplied"
    return model.ntd(model.constant_field(spec.lam0, spec.mu0)).fro, "background"


def _extremal(diff: np.ndarray, stiffer: bool):
    w = np.linalg.eigvalsh(0.5 * (diff + diff.T))
    return (w[0] if stiffer else w[-1]), w


def _map(fn, items, threads):
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def nu_standard(spec: MaterialSpec, partition: PixelPartition, model: ForwardModel,
                reference_norm: float | None = None, threads: int = 1) -> GuaranteeReport:
    """Guarantee statistic of the standard test (one solve set per pixel)."""
    comparison = model.ntd(model.constant_field(*spec.comparison_background())).values

    def pixel(s):
        return _extremal(model.ntd(test_field_tau(spec, s, partition)).values - comparison, spec.stiffer)

    out = _map(pixel, range(partition.n_pixels), threads)
    values = np.array([v for v, _ in out])
    nu = values.max() if spec.stiffer else values.min()
    ref, choice = _reference_norm(spec, model, reference_norm)
    return GuaranteeReport(
        theorem_for(STANDARD, spec.direction), float(nu), values, ref, choice, [w for _, w in out]
    )


def nu_linearized(spec: MaterialSpec, partition: PixelPartition, model: ForwardModel,
                  reference_norm: float | None = None, threads: int = 1) -> GuaranteeReport:
    """Guarantee statistic of the linearized test (two solve sets in total)."""
    background = background_solveset(spec, model)
    comparison = model.ntd(model.constant_field(*spec.comparison_background())).values

    def pixel(s):
        return _extremal(linearized_reference(spec, s, partition, background).values - comparison, spec.stiffer)

    out = _map(pixel, range(partition.n_pixels), threads)
    values = np.array([v for v, _ in out])
    nu = values.max() if spec.stiffer else values.min()
    ref, choice = _reference_norm(spec, model, reference_norm)
    return GuaranteeReport(
        theorem_for(LINEARIZED, spec.direction), float(nu), values, ref, choice, [w for _, w in out]
    )


def guarantee(spec: MaterialSpec, partition: PixelPartition, model: ForwardModel,
              method: str = LINEARIZED, **kw) -> GuaranteeReport:
    if method == STANDARD:
        return nu_standard(spec, partition, model, **kw)
    if method == LINEARIZED:
        return nu_linearized(spec, partition, model, **kw)
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class SweepRow:
    eps_lam: float
    eps_mu: float
    nu: float
    delta_max: float
    eta_max: float
    certified_at_zero_noise: bool


@dataclass(frozen=True, eq=False)
class SweepTable:
    theorem: str
    reference_choice: str
    rows: list[SweepRow]

    def eta_grid(self, eps_lam_values, eps_mu_values) -> np.ndarray:
        lookup = {(r.eps_lam, r.eps_mu): r.eta_max for r in self.rows}
        return np.array([[lookup[a, b] for b in eps_mu_values] for a in eps_lam_values])

    def to_csv(self, header: str | None = None) -> str:
        buf = io.StringIO()
        if header:
            for line in header.splitlines():
                buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eps_lambda", "eps_mu", "nu", "delta_max", "eta_max_percent", "certified_at_zero_noise"])
        for r in self.rows:
            w.writerow([
                f"{100 * r.eps_lam:.10g}", f"{100 * r.eps_mu:.10g}", f"{r.nu:.17e}",
                f"{r.delta_max:.17e}", f"{100 * r.eta_max:.17e}", int(r.certified_at_zero_noise),
            ])
        return buf.getvalue()

    def plot_data(self, header: str | None = None) -> str:
        """Long-format ``x, y, series`` table: eta_max over eps_mu, one series per eps_lambda."""
        buf = io.StringIO()
        if header:
            for line in header.splitlines():
                buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y", "series"])
        for r in self.rows:
            w.writerow([f"{100 * r.eps_mu:.10g}", f"{100 * r.eta_max:.17e}", f"eps_lambda={100 * r.eps_lam:.10g}%"])
        return buf.getvalue()


def sweep_noise_map(spec: MaterialSpec, partition: PixelPartition, model: ForwardModel,
                    eps_lam_values, eps_mu_values, method: str = LINEARIZED,
                    reference_norm: float | None = None, threads: int = 1) -> SweepTable:
    """Maximal certifiable noise level over a grid of background errors.

    Solve sets are cached in ``model``, so grid points sharing a background
    bound reuse them.
    """
    eps_lam_values = list(eps_lam_values)
    eps_mu_values = list(eps_mu_values)
    if not eps_lam_values or not eps_mu_values:
        raise ValueError("sweep grids must be nonempty")
    if min(eps_lam_values) < 0 or min(eps_mu_values) < 0:
        raise ValueError("background errors must be nonnegative")
    ref, choice = _reference_norm(spec, model, reference_norm)
    rows = []
    tag = theorem_for(method, spec.direction)
    for el in eps_lam_values:
        for em in eps_mu_values:
            report = guarantee(spec.with_errors(el, em), partition, model, method,
                               reference_norm=ref, threads=threads)
            rows.append(SweepRow(el, em, report.nu, report.delta_max, report.eta_max,
                                 certify(report, 0.0)))
    return SweepTable(tag, choice, rows)
