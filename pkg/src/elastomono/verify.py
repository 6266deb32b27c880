"""Empirical checks of the monotonicity inequalities and of resolution guarantees.

Scenarios draw a true Lamé field that satisfies the admissibility
assumptions of a :class:`MaterialSpec`; reconstructions on simulated noisy
data are then checked against the two guarantee conditions: every pixel
inside the inclusion is marked, and nothing is marked without an inclusion.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .certify import certify, guarantee
from .fem import LameField, assemble_form
from .geometry import PixelPartition, build_mesh, build_patches, build_partition
from .monotests import MaterialSpec, Reconstruction, reconstruct
from .ntd import ForwardModel, add_noise, assemble_derivative_increment

LEMMA_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class Scenario:
    inclusion: frozenset[int]
    lam: np.ndarray
    mu: np.ndarray
    seed: int
    partition: PixelPartition | None = None

    @property
    def empty(self) -> bool:
        return not self.inclusion

    def field(self) -> LameField:
        return LameField(self.lam, self.mu)


def _inclusion_box(spec: MaterialSpec):
    if spec.stiffer:
        return (spec.lam_dmin, spec.lam_max), (spec.mu_dmin, spec.mu_max)
    # softer: anything between half the bound and the bound itself
    return (0.5 * spec.lam_dmax, spec.lam_dmax), (0.5 * spec.mu_dmax, spec.mu_dmax)


def generate_scenario(spec: MaterialSpec, partition: PixelPartition, seed: int,
                      empty_probability: float = 0.5, max_pixels: int | None = None,
                      at_bound: bool = False) -> Scenario:
    """Random admissible truth, deterministic per ``seed``.

    ``at_bound`` puts the inclusion exactly at its contrast bound and the
    background at the bound the tests compare against, the worst case for
    the first guarantee condition.
    """
    if not 0 <= empty_probability <= 1:
        raise ValueError("empty_probability must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    n_pix = partition.n_pixels
    n_el = partition.mesh.n_elements
    if max_pixels is None:
        max_pixels = max(1, n_pix // 4)
    max_pixels = min(max_pixels, n_pix)

    if rng.random() < empty_probability:
        pixels = frozenset()
    else:
        k = int(rng.integers(1, max_pixels + 1))
        pixels = frozenset(int(s) for s in rng.choice(n_pix, size=k, replace=False))

    lam_lo, lam_hi = spec.lam_bmin, spec.lam_bmax
    mu_lo, mu_hi = spec.mu_bmin, spec.mu_bmax
    if at_bound:
        bl, bm = spec.linearization_point()
        lam = np.full(n_el, bl)
        mu = np.full(n_el, bm)
    else:
        lam = rng.uniform(lam_lo, lam_hi, n_el)
        mu = rng.uniform(mu_lo, mu_hi, n_el)
        # lam_bmin may be 0 at 100 % background error; keep the field admissible
        lam = np.maximum(lam, 0.0)

    inside = partition.elements_of(sorted(pixels)) if pixels else np.array([], dtype=np.int64)
    (l0, l1), (m0, m1) = _inclusion_box(spec)
    if at_bound:
        lam[inside] = l0 if spec.stiffer else l1
        mu[inside] = m0 if spec.stiffer else m1
    else:
        lam[inside] = rng.uniform(l0, l1, len(inside))
        mu[inside] = rng.uniform(m0, m1, len(inside))
    return Scenario(pixels, lam, mu, int(seed), partition)


@dataclass(frozen=True)
class GuaranteeCheck:
    condition_i_holds: bool
    condition_ii_holds: bool | None
    missed_pixels: tuple[int, ...] = ()
    spurious_pixels: tuple[int, ...] = ()

    @property
    def ok(self) -> bool:
        return self.condition_i_holds and self.condition_ii_holds is not False


def check_definition(recon: Reconstruction, scenario: Scenario) -> GuaranteeCheck:
    part = recon.partition
    same = scenario.partition is None or (
        scenario.partition.p == part.p and scenario.partition.mesh.n == part.mesh.n)
    if not same or len(scenario.lam) != part.mesh.n_elements or any(s >= part.n_pixels for s in scenario.inclusion):
        raise ValueError("reconstruction and scenario use different partitions")
    marked = recon.marked
    missed = tuple(sorted(scenario.inclusion - marked))
    if scenario.empty:
        spurious = tuple(sorted(marked))
        return GuaranteeCheck(not missed, not spurious, missed, spurious)
    return GuaranteeCheck(not missed, None, missed, ())


@dataclass
class LemmaReport:
    trials: int
    worst_slack: dict[str, float] = field(default_factory=dict)
    violations: dict[str, int] = field(default_factory=dict)
    seeds: list[int] = field(default_factory=list)

    def record(self, name: str, slack: float):
        self.worst_slack[name] = min(self.worst_slack.get(name, np.inf), float(slack))
        self.violations[name] = self.violations.get(name, 0) + int(slack < -LEMMA_RTOL)

    @property
    def ok(self) -> bool:
        return not any(self.violations.values())

    def to_dict(self) -> dict:
        return asdict(self)


def _random_field(rng, n_el, lam0, mu0, spread=(0.5, 2.0)) -> LameField:
    return LameField(lam0 * rng.uniform(*spread, n_el), mu0 * rng.uniform(*spread, n_el))


def lemma_suite(seed: int = 0, n: int = 4, trials: int = 20, q: int = 1,
                lam0: float = 2.8910e9, mu0: float = 1.1808e9,
                fault_injection: bool = False) -> LemmaReport:
    """Check the monotonicity inequalities on random field pairs.

    Slacks are relative: each inequality gap is divided by the size of the
    quantities it compares. ``fault_injection`` flips the sign of the
    sandwich's upper bound so that the harness must report violations.
    """
    if trials < 1:
        raise ValueError("trial count must be at least 1")
    mesh = build_mesh(n)
    model = ForwardModel(build_patches(mesh, q))
    partition = build_partition(mesh, n)
    loads = np.eye(model.M)
    report = LemmaReport(trials)
    sign = -1.0 if fault_injection else 1.0
    for t in range(trials):
        trial_seed = seed * 100_003 + t
        report.seeds.append(trial_seed)
        rng = np.random.default_rng(trial_seed)
        f1 = _random_field(rng, mesh.n_elements, lam0, mu0)
        f2 = _random_field(rng, mesh.n_elements, lam0, mu0)
        s1, s2 = model.solve(f1), model.solve(f2)
        L1, L2 = s1.ntd.values, s2.ntd.values

        dl, dm = f1.lam - f2.lam, f1.mu - f2.mu
        K_diff = assemble_form(mesh, dl, dm)
        K_quot = assemble_form(mesh, f2.lam / f1.lam * dl, f2.mu / f1.mu * dm)
        for g in loads:
            # solutions are linear in the load, so u^g = U g
            u1, u2 = s1.displacements @ g, s2.displacements @ g
            middle = g @ (L2 - L1) @ g
            upper = u2 @ (K_diff @ u2)
            lower = u1 @ (K_diff @ u1)
            quot = u2 @ (K_quot @ u2)
            scale = max(abs(middle), abs(upper), abs(lower), g @ L1 @ g, g @ L2 @ g)
            report.record("sandwich_upper", (sign * upper - middle) / scale)
            report.record("sandwich_lower", (middle - lower) / scale)
            report.record("quotient_bound", (middle - quot) / scale)

        # Loewner ordering: a pointwise larger field gives a smaller NtD matrix
        bump = LameField(f2.lam + lam0 * rng.uniform(0, 1, mesh.n_elements),
                         f2.mu + mu0 * rng.uniform(0, 1, mesh.n_elements))
        Lb = model.ntd(bump).values
        diff = L2 - Lb
        report.record("loewner_order", np.linalg.eigvalsh(0.5 * (diff + diff.T))[0] / np.linalg.norm(L2))

        # derivative monotonicity in the direction, at field 2
        region = rng.choice(partition.n_pixels, size=max(1, partition.n_pixels // 4), replace=False)
        a_lam, a_mu = rng.uniform(-1, 1, 2) * (lam0, mu0)
        b_lam, b_mu = a_lam + lam0 * rng.uniform(0, 1), a_mu + mu0 * rng.uniform(0, 1)
        inc_a = assemble_derivative_increment(s2.displacements, partition, region, a_lam, a_mu).values
        inc_b = assemble_derivative_increment(s2.displacements, partition, region, b_lam, b_mu).values
        scale = max(np.linalg.norm(inc_a), np.linalg.norm(inc_b))
        report.record("derivative_order", np.linalg.eigvalsh(inc_a - inc_b)[0] / scale)
    return report


@dataclass
class TrialVerdict:
    seed: int
    inclusion: list[int]
    marked: list[int]
    condition_i: bool
    condition_ii: bool | None
    missed: list[int]
    spurious: list[int]


@dataclass
class SoundnessReport:
    theorem: str
    eta: float
    delta: float
    nu: float
    eta_max: float
    certified: bool
    skipped: bool
    trials: list[TrialVerdict] = field(default_factory=list)

    @property
    def passed(self) -> int:
        return sum(t.condition_i and t.condition_ii is not False for t in self.trials)

    @property
    def pass_fraction(self) -> float:
        return self.passed / len(self.trials) if self.trials else float("nan")

    @property
    def ok(self) -> bool:
        return self.skipped or self.passed == len(self.trials)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def soundness_trial(spec: MaterialSpec, partition: PixelPartition, model: ForwardModel,
                    method: str, eta: float, trials: int, seed: int = 0,
                    run_uncertified: bool = False, threads: int = 1) -> SoundnessReport:
    """Reconstruct ``trials`` random scenarios at noise level ``eta``.

    Odd trials have no inclusion; trial 0 puts the inclusion at its bounds.
    Uncertified settings are skipped unless ``run_uncertified`` is set.
    """
    if trials < 1:
        raise ValueError("trial count must be at least 1")
    report = guarantee(spec, partition, model, method, threads=threads)
    delta = eta * report.reference_norm
    ok = certify(report, delta)
    out = SoundnessReport(report.theorem, eta, delta, report.nu, report.eta_max, ok, not (ok or run_uncertified))
    if out.skipped:
        return out
    for t in range(trials):
        trial_seed = seed * 1_000_003 + t
        empty = t % 2 == 1
        sc = generate_scenario(spec, partition, trial_seed, 1.0 if empty else 0.0, at_bound=(t == 0))
        truth = model.ntd(sc.field())
        noisy = add_noise(truth, eta, trial_seed, reference_norm=report.reference_norm).noisy
        recon = reconstruct(noisy, delta, spec, partition, model, method, threads=threads)
        chk = check_definition(recon, sc)
        out.trials.append(TrialVerdict(
            trial_seed, sorted(sc.inclusion), sorted(recon.marked), chk.condition_i_holds,
            chk.condition_ii_holds, list(chk.missed_pixels), list(chk.spurious_pixels),
        ))
    return out
