# %% [markdown]
# Max-cut on a small graph, step by step.
#
# A weighted graph becomes the linear objective f(X) = <C, X> with
# C = (W - Diag(We)) / 4. The solver follows a penalty path that pushes
# the low-rank factor V toward rank one. Once the rank-one gap drops below
# eps, the leading singular vector is a sign vector up to ~1e-9.

# %%
import numpy as np

from dcfac import PenaltyConfig, brute_force, build_maxcut, solve

rng = np.random.default_rng(3)
n = 14
W = np.triu(rng.choice([0.0, 1.0, 2.0], (n, n), p=[0.5, 0.3, 0.2]), 1)
W = W + W.T
obj, inst = build_maxcut(W, name="random-14")

# %% Solve with the default schedule: rho0 = 1e-3, growth 1.005, eps = 1e-8
rep = solve(obj, inst)
print(f"cut {rep.obj:g} after {rep.outer_iters} penalty steps, exit: {rep.exit_reason}")
print(f"infeasibility of the extracted vector: {rep.infeas_inf:.1e}")

# %% With 14 vertices the exact optimum is cheap to enumerate
exact = brute_force(inst)
print(f"exact optimum {exact.opt_value:g} ({exact.evaluations} assignments)")

# %% The penalty path: sigma_1(V)^2 climbs to p as rho grows
s2 = rep.specnorm_trace ** 2
for j in (0, len(s2) // 4, len(s2) // 2, len(s2) - 1):
    rho = rep.rho_trace[min(j, len(rep.rho_trace) - 1)]
    print(f"step {j:5d}  rho {rho:9.3e}  p - sigma1^2 = {inst.p - s2[j]:.2e}")

# %% Different starting points can land on different cuts
for seed in range(4):
    r = solve(obj, inst, PenaltyConfig(seed=seed))
    print(f"seed {seed}: cut {r.obj:g}")
