import numpy as np

from sgdirichlet.critical import mountain_pass
from sgdirichlet.functional import FunctionalContext
from sgdirichlet.gasket import build_level
from sgdirichlet.nonlinearity import ProblemSpec, power_problem

# Only the midpoint with index 3 is free: I(t) = (10/3) t^2 - (2/9) t^4 / 4
lev = build_level(3, 1)
ctx = FunctionalContext(lev, power_problem(ProblemSpec(m=1)), free=np.array([3]))

ts = np.linspace(0, 10, 11)
print([round(ctx.I_of(np.array([t])), 3) for t in ts])

rep = mountain_pass(ctx, ctx.function(np.array([10.0])))
print("kappa", rep.energy_value, "at t =", rep.u.values[3], "(exact 50 at sqrt(30) =", np.sqrt(30), ")")
print("kappa history", rep.extra["kappa_history"][:5], "...")
print(rep.message)
