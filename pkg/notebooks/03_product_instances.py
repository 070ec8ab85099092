# %% [markdown]
# Products of two binary quadratics.
#
# Each factor is written as <C_i, X> over the shared homogenized variable, and
# the solver works on f(X) = <C_1, X><C_2, X>. No global Lipschitz constant
# is available here, so every inner step searches for L with the descent
# lemma.

# %%
import time

import numpy as np

from dcfac import brute_force, gen_product_maxcut, gen_product_random, solve

# %% Random instances with l = 2 have 16 assignments, so they can be enumerated
agree = 0
for seed in range(10):
    inst = gen_product_random(2, seed)
    rep = solve(inst.objective, inst)
    best = brute_force(inst).opt_value
    agree += abs(rep.obj - best) <= 1e-6
    print(f"seed {seed}: solver {rep.obj:+.6f}  exact {best:+.6f}")
print(f"{agree}/10 exact")

# %% A larger instance: l = 100, so p = 201
inst = gen_product_random(100, 0)
t = time.perf_counter()
rep = solve(inst.objective, inst)
print(f"l=100: objective {rep.obj:.4f}, {rep.outer_iters} outer steps, "
      f"{time.perf_counter() - t:.1f}s, infeasibility {rep.infeas_inf:.1e}")

# %% Product of two cut values: the objective is cut_1(x) * cut_2(y) on
# spectrally normalized weights
ring = np.roll(np.eye(6), 1, axis=1)
ring = ring + ring.T
star = np.zeros((6, 6))
star[0, 1:] = star[1:, 0] = 1.0
inst = gen_product_maxcut(ring, star)
rep = solve(inst.objective, inst)
print("product of cuts:", rep.obj, " exact:", brute_force(inst).opt_value)
