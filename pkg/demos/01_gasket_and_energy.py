import numpy as np

from sgdirichlet.energy import DiscreteFunction, energy, extend_to_level, harmonic_extension, restrict
from sgdirichlet.gasket import build_level, hausdorff_dimension

# Levels of the gasket for N = 3
for m in range(6):
    lev = build_level(3, m)
    print(f"m={m}: {lev.n_vertices:5d} vertices {len(lev.edges):5d} edges {len(lev.cells):4d} cells")
print("Hausdorff dimension", hausdorff_dimension(3))

# Coordinates are integer numerators over 2^m
lev = build_level(3, 1)
print(lev.vertices, "/", lev.denominator)

# Corner data (1, 0, 0) extended one level
u0 = DiscreteFunction(build_level(3, 0), np.array([1.0, 0.0, 0.0]), zero_boundary=False)
u1 = harmonic_extension(u0)
print("midpoint values", u1.values[3:])
print("energy per level", [round(energy(extend_to_level(u0, k)), 12) for k in range(5)])

# A random function: energies of its restrictions increase with the level
rng = np.random.default_rng(0)
fine = build_level(3, 5)
vals = rng.standard_normal(fine.n_vertices)
vals[:3] = 0
u = DiscreteFunction(fine, vals)
print("restricted energies", [f"{energy(restrict(u, k)):.3f}" for k in range(6)])
