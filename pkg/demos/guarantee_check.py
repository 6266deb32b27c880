"""
Checking the guarantees empirically
===================================

Two harnesses: the monotonicity inequalities on random field pairs, and the
full reconstruction pipeline on random admissible scenarios at a certified
noise level. Both should report zero violations.
"""

from elastomono import ALUMINIUM, MAKROLON, ForwardModel, MaterialSpec, build_mesh, build_partition, build_patches
from elastomono.certify import guarantee
from elastomono.monotests import LINEARIZED, STANDARD
from elastomono.verify import lemma_suite, soundness_trial

lemmas = lemma_suite(seed=0, n=4, trials=20)
print("lemma suite, 20 random pairs on a 4x4x4 mesh")
for name, slack in lemmas.worst_slack.items():
    print(f"  {name:17s} worst relative slack {slack:+.3e}  violations {lemmas.violations[name]}")

# The harness catches a deliberately broken inequality.
broken = lemma_suite(seed=0, n=4, trials=20, fault_injection=True)
print("with the upper sandwich bound's sign flipped:", broken.violations["sandwich_upper"], "violations")

mesh = build_mesh(6)
model = ForwardModel(build_patches(mesh, q=2))
partition = build_partition(mesh, p=3)
caps = dict(lam_max=2 * ALUMINIUM[0], mu_max=2 * ALUMINIUM[1])
cases = [
    ("stiff inclusion", MaterialSpec.from_materials(MAKROLON, ALUMINIUM, eps_lam=0.01, eps_mu=0.01, **caps)),
    ("soft inclusion", MaterialSpec.from_materials(ALUMINIUM, MAKROLON, eps_lam=0.01, eps_mu=0.01)),
]
print("\nsoundness, 20 scenarios each at half the certified noise level")
for label, spec in cases:
    for method in (STANDARD, LINEARIZED):
        eta = 0.5 * guarantee(spec, partition, model, method).eta_max
        r = soundness_trial(spec, partition, model, method, eta, trials=20, seed=2)
        print(f"  {label:15s} {r.theorem}: eta = {100 * eta:.4f}%  passed {r.passed}/{len(r.trials)}")

# Far above the certified level an empty cube starts to light up.
spec = cases[0][1]
r = soundness_trial(spec, partition, model, STANDARD, eta=0.2, trials=6, run_uncertified=True)
spurious = [t.spurious for t in r.trials if not t.inclusion]
print("\nuncertified eta = 20 %: spurious marks on empty cubes:", spurious)
