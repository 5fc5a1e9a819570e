from sgdirichlet.nonlinearity import ProblemSpec
from sgdirichlet.thresholds import compute_constants, threshold_report

spec = ProblemSpec(N=3, m=4, r=1.5, s=1.8, q=4.0)

# Constants depend only on N, q and s
c = compute_constants(spec.N, spec.q, spec.s)
print(c)

# With lambda = Lambda / 2 the sublinear minimizer u_lambda exists but is tiny:
# its norm scales like lambda ** (1 / (2 - s)) = lambda ** 5
rep = threshold_report(spec, lam=c.Lambda / 2)
for key, val in rep.table():
    print(f"{key:<24} {val!r}")

# eta_2 is enormous because int |u_lambda|^r is tiny, so eta_1 binds
print("eta_lambda / 2 =", rep.eta_lambda / 2)
