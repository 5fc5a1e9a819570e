import numpy as np

from sgdirichlet.gasket import build_level
from sgdirichlet.nonlinearity import check_C2, example_f1
from sgdirichlet.thresholds import estimate_rho2

nl = example_f1(1.0, 4.0)

# Growth and sign conditions on a sampling grid
grid = np.concatenate([-np.logspace(-3, 2, 50), [0.0], np.logspace(-3, 2, 50)])
rep = check_C2(nl, range(3), grid, alpha=1.0, m_const=1.0, t0=1.0, M=0.25, beta=4.0, t1=1.0)
print("C2 sample check:", rep.ok, rep.n_samples, "samples")

# Truncated bump witness and a few ascent steps on J / Phi
est = estimate_rho2(nl, 1.0, build_level(3, 4))
print("witness ratio", est.witness_ratio)
print("rho2 lower bound", est.rho2_lower, "-> threshold upper bound", est.lambda_upper)
print("plateau vertices", int(est.plateau.sum()), "of", est.witness.level.n_vertices)
