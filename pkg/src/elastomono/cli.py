"""Command-line experiment runner.

Exit codes: 0 success, 1 invalid configuration, 2 numerical failure,
3 a verification found an invariant violation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__, config
from .certify import certify, guarantee, sweep_noise_map
from .fem import SolverError
from .monotests import reconstruct
from .ntd import SymmetryError, add_noise, matrix_csv_text
from .verify import check_definition, generate_scenario, lemma_suite, soundness_trial

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VIOLATION = 0, 1, 2, 3

DEVIATIONS = [
    "noise matrix symmetrized and renormalized to unit Frobenius norm",
    "semidefiniteness tolerance relative to the compared operators' Frobenius norm",
    "eta_max relative to the reference NtD norm named in reference_norm",
]


class _Run:
    def __init__(self, args, subcommand: str):
        raw = config.load(args.config)
        if args.seed is not None:
            raw["seed"] = args.seed
        self.raw = raw
        self.subcommand = subcommand
        self.setup = config.build(raw)
        self.hash = config.canonical_hash(raw)
        self.seed = raw.get("seed", 0)
        threads = args.threads if args.threads is not None else raw.get("threads", 1)
        self.threads = threads or (os.cpu_count() or 1)
        self.out = Path(args.out or raw.get("output_dir", "out"))
        self.out.mkdir(parents=True, exist_ok=True)
        self.written: list[str] = []

    @property
    def header(self) -> str:
        return f"config_sha256={self.hash}\nseeds={json.dumps([self.seed])}"

    def write(self, name: str, text: str) -> None:
        path = self.out / name
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(text)
        os.replace(tmp, path)
        self.written.append(name)

    def write_json(self, name: str, payload: dict) -> None:
        payload = {"config_sha256": self.hash, "seeds": [self.seed], **payload}
        self.write(name, json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n")

    def finish(self, **extra) -> None:
        s = self.setup
        self.write_json("metadata.json", {
            "subcommand": self.subcommand,
            "theorem": s.theorem,
            "reference_norm": s.raw.get("reference_norm", "background"),
            "versions": {"elastomono": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
            "deviations": DEVIATIONS,
            "artifacts": sorted(self.written),
            **extra,
        })

    def delta_for(self, report) -> tuple[float, float]:
        noise = self.raw.get("noise", {})
        if "eta_percent" in noise and "eta_fraction_of_max" in noise:
            raise config.ConfigError("noise: give either eta_percent or eta_fraction_of_max")
        if "eta_percent" in noise:
            eta = noise["eta_percent"] / 100
        else:
            eta = noise.get("eta_fraction_of_max", 0.0) * report.eta_max
        return eta, eta * report.reference_norm


def _jsonable(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.ndarray, frozenset, set)):
        return sorted(o.tolist() if isinstance(o, np.ndarray) else o)
    raise TypeError(f"not serializable: {type(o)}")


def cmd_sweep(args) -> int:
    run = _Run(args, "sweep")
    s = run.setup
    if "sweep" not in run.raw:
        raise config.ConfigError("sweep: section required for the sweep subcommand")
    grid = run.raw["sweep"]
    eps_lam = [v / 100 for v in grid["eps_lambda_percent"]]
    eps_mu = [v / 100 for v in grid["eps_mu_percent"]]
    try:
        table = sweep_noise_map(s.spec, s.partition, s.model, eps_lam, eps_mu, s.method,
                                reference_norm=s.reference_norm, threads=run.threads)
    except config.SpecError as exc:
        raise config.ConfigError(f"sweep: grid point violates the material assumptions: {exc}") from exc
    run.write("sweep.csv", table.to_csv(run.header))
    run.write("sweep_plot.csv", table.plot_data(run.header))
    run.finish(eta_max_percent_max=100 * max(r.eta_max for r in table.rows))
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    run = _Run(args, "reconstruct")
    s = run.setup
    if "scenario" not in run.raw:
        raise config.ConfigError("scenario: section required for the reconstruct subcommand")
    sc_cfg = run.raw["scenario"]
    report = guarantee(s.spec, s.partition, s.model, s.method,
                       reference_norm=s.reference_norm, threads=run.threads)
    eta, delta = run.delta_for(report)
    if "pixels" in sc_cfg:
        bad = [p for p in sc_cfg["pixels"] if p >= s.partition.n_pixels]
        if bad:
            raise config.ConfigError(f"scenario.pixels: index {bad[0]} out of range")
        sc = _explicit_scenario(s, sc_cfg["pixels"], sc_cfg.get("at_bound", True), run.seed)
    else:
        sc = generate_scenario(s.spec, s.partition, sc_cfg.get("seed", run.seed),
                               sc_cfg.get("empty_probability", 0.5), at_bound=sc_cfg.get("at_bound", False))
    truth = s.model.ntd(sc.field())
    noisy = add_noise(truth, eta, run.seed, reference_norm=report.reference_norm).noisy
    recon = reconstruct(noisy, delta, s.spec, s.partition, s.model, s.method, threads=run.threads)
    check = check_definition(recon, sc)
    run.write("reconstruction.csv", recon.to_csv(run.header))
    run.write_json("check.json", {
        "inclusion": sorted(sc.inclusion),
        "marked": sorted(recon.marked),
        "condition_i_holds": check.condition_i_holds,
        "condition_ii_holds": check.condition_ii_holds,
        "missed_pixels": list(check.missed_pixels),
        "spurious_pixels": list(check.spurious_pixels),
        "certified": certify(report, delta),
        "eta": eta,
        "delta": delta,
        "nu": report.nu,
    })
    run.finish()
    return EXIT_OK


def _explicit_scenario(setup, pixels, at_bound, seed):
    sc = generate_scenario(setup.spec, setup.partition, seed, 1.0, at_bound=at_bound)
    spec = setup.spec
    inside = setup.partition.elements_of(pixels) if pixels else []
    lam, mu = sc.lam.copy(), sc.mu.copy()
    lam[inside] = spec.lam_dmin if spec.stiffer else spec.lam_dmax
    mu[inside] = spec.mu_dmin if spec.stiffer else spec.mu_dmax
    return type(sc)(frozenset(pixels), lam, mu, sc.seed, setup.partition)


def cmd_verify(args) -> int:
    run = _Run(args, "verify")
    s = run.setup
    v = run.raw.get("verify", {})
    lemma_trials = v.get("lemma_trials", 20)
    sound_trials = v.get("soundness_trials", 50)
    if lemma_trials < 1:
        raise config.ConfigError("verify.lemma_trials: trial count must be at least 1")
    if sound_trials < 1:
        raise config.ConfigError("verify.soundness_trials: trial count must be at least 1")
    lemmas = lemma_suite(run.seed, v.get("lemma_n", 4), lemma_trials, v.get("lemma_q", 1),
                         s.spec.lam0, s.spec.mu0, fault_injection=args.fault_injection)
    report = guarantee(s.spec, s.partition, s.model, s.method, threads=run.threads)
    eta = v.get("eta_fraction_of_max", 0.5) * report.eta_max
    sound = soundness_trial(s.spec, s.partition, s.model, s.method, eta, sound_trials,
                            seed=run.seed, threads=run.threads)
    ok = lemmas.ok and sound.ok
    run.write_json("verify.json", {
        "ok": ok,
        "fault_injection": bool(args.fault_injection),
        "lemmas": lemmas.to_dict(),
        "soundness": sound.to_dict(),
    })
    run.finish(ok=ok)
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_ntd_dump(args) -> int:
    run = _Run(args, "ntd-dump")
    s = run.setup
    if "scenario" in run.raw:
        sc_cfg = run.raw["scenario"]
        sc = generate_scenario(s.spec, s.partition, sc_cfg.get("seed", run.seed),
                               sc_cfg.get("empty_probability", 0.5), at_bound=sc_cfg.get("at_bound", False))
        field = sc.field()
    else:
        field = s.model.constant_field(s.spec.lam0, s.spec.mu0)
    ntd = s.model.ntd(field)
    run.write("ntd.csv", matrix_csv_text(ntd.values, run.header))
    run.finish(frobenius_norm=ntd.fro, symmetry_defect=ntd.symmetry_defect)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="elastomono", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in [("sweep", cmd_sweep), ("reconstruct", cmd_reconstruct),
                     ("verify", cmd_verify), ("ntd-dump", cmd_ntd_dump)]:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, metavar="PATH")
        p.add_argument("--out", metavar="DIR")
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int, metavar="N", help="0 = one per CPU")
        if name == "verify":
            p.add_argument("--fault-injection", action="store_true",
                           help="flip one lemma inequality to self-test the harness")
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except config.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, SymmetryError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
