import numpy as np

from sgdirichlet.critical import three_solutions
from sgdirichlet.nonlinearity import ProblemSpec
from sgdirichlet.thresholds import compute_constants, threshold_report

lam = compute_constants(3, 4.0, 1.8).Lambda / 2
spec = ProblemSpec(N=3, m=4, r=1.5, s=1.8, q=4.0, lam=lam)
thr = threshold_report(spec, lam=lam)
spec = spec.replace(eta=thr.eta_lambda / 2)

res = three_solutions(spec)
for note in res.notes:
    print("#", note)

# Energies, residuals and sizes of the three critical points
for key, rep in res.reports.items():
    print(f"{key}: {rep.kind:15s} I={rep.energy_value: .4e} residual={rep.residual:.2e} "
          f"|u|={rep.norm:.3e} sup={np.max(np.abs(rep.u.values)):.3e}")

print("m =", res.thresholds.m)
print("ordering", res.ordering, "->", res.ordering_holds)

# The first two solutions live at the scale of u_lambda (about 1e-21), so their
# sup-norm distance is far below any fixed absolute threshold
print("sup distances", res.distances)
