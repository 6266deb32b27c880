"""
Forward problem: from Lamé parameters to an NtD matrix
======================================================

Clamp the bottom of a unit cube, push on the other five faces patch by
patch, and record how much each patch moves. The resulting M x M matrix is
the data every test in this package works with.
"""

import numpy as np

from elastomono import MAKROLON, ForwardModel, assemble_derivative_increment, build_mesh, build_partition, build_patches
from elastomono.fem import LameField

# A 6x6x6 hexahedral mesh with 2x2 traction patches on each loaded face: M = 20.
mesh = build_mesh(6)
layout = build_patches(mesh, q=2)
model = ForwardModel(layout)
print(f"{mesh.n_elements} elements, {mesh.n_dofs} dofs, M = {layout.M} patches")

# Homogeneous Makrolon (Pa). One sparse factorization serves all 20 loads.
lam0, mu0 = MAKROLON
background = model.ntd(model.constant_field(lam0, mu0))
print(f"||Lambda||_F = {background.fro:.4e}   symmetry defect = {background.symmetry_defect:.1e}")
print("diagonal (first 5):", np.array2string(np.diag(background.values)[:5], precision=3))

# Stiffer material means smaller displacements: Lambda decreases in the Loewner order.
stiffer = model.ntd(model.constant_field(2 * lam0, 2 * mu0))
gap = np.linalg.eigvalsh((background - stiffer).values)
print(f"eigenvalues of Lambda(l0, m0) - Lambda(2 l0, 2 m0): min {gap[0]:.3e}, max {gap[-1]:.3e}")

# The derivative in the direction of one pixel, against a difference quotient.
partition = build_partition(mesh, p=3)
pixel = 13  # the centre of the 3x3x3 pixel grid
solves = model.solve(model.constant_field(lam0, mu0))
inc = assemble_derivative_increment(solves.displacements, partition, [pixel], lam0, mu0).values
chi = partition.indicator([pixel])
print("\nfinite-difference check of the derivative on the centre pixel")
for t in (1e-2, 1e-3, 1e-4):
    bumped = model.ntd(LameField(lam0 * (1 + t * chi), mu0 * (1 + t * chi))).values
    err = np.linalg.norm((bumped - background.values) / t - inc) / np.linalg.norm(inc)
    print(f"  t = {t:.0e}: relative error {err:.3e}")
