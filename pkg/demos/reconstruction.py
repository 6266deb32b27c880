"""
Reconstructing an inclusion from noisy data
===========================================

Place an aluminium block in a Makrolon cube, simulate noisy NtD data at half
the certified noise level, and mark pixels with the linearized test.
"""

import numpy as np

from elastomono import (
    ALUMINIUM,
    MAKROLON,
    ForwardModel,
    MaterialSpec,
    add_noise,
    build_mesh,
    build_partition,
    build_patches,
    check_definition,
    reconstruct,
)
from elastomono.certify import certify, guarantee
from elastomono.verify import generate_scenario

mesh = build_mesh(6)
model = ForwardModel(build_patches(mesh, q=2))
partition = build_partition(mesh, p=3)
spec = MaterialSpec.from_materials(MAKROLON, ALUMINIUM, eps_lam=0.01, eps_mu=0.01,
                                   lam_max=2 * ALUMINIUM[0], mu_max=2 * ALUMINIUM[1])

report = guarantee(spec, partition, model)
eta = 0.5 * report.eta_max
delta = eta * report.reference_norm
print(f"{report.theorem}: nu = {report.nu:.3e}, eta_max = {100 * report.eta_max:.4f}%, using eta = {100 * eta:.4f}%")
print("certified:", certify(report, delta))

# A random admissible truth: background within 1 % of Makrolon, a few stiff pixels.
scenario = generate_scenario(spec, partition, seed=8, empty_probability=0.0, max_pixels=4)
data = add_noise(model.ntd(scenario.field()), eta, seed=8, reference_norm=report.reference_norm).noisy
recon = reconstruct(data, delta, spec, partition, model)

print("\ntrue inclusion:", sorted(scenario.inclusion))
print("marked pixels: ", sorted(recon.marked))
check = check_definition(recon, scenario)
print("every covered pixel marked:", check.condition_i_holds)

# Layers from bottom (clamped) to top; X = marked, o = true inclusion, * = both.
for k in range(partition.p):
    print(f"\nlayer k={k}")
    for j in reversed(range(partition.p)):
        row = ""
        for i in range(partition.p):
            s = i + partition.p * (j + partition.p * k)
            truth, marked = s in scenario.inclusion, s in recon.marked
            row += " " + ("*" if truth and marked else "o" if truth else "X" if marked else ".")
        print(row)

stats = np.round(recon.statistics / report.reference_norm, 6)
print("\nnormalized test statistics of the true pixels:", [stats[s] for s in sorted(scenario.inclusion)])
