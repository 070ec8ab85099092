# %% [markdown]
# Binary quadratic programs over {0, 1}^n.
#
# max zᵀAz becomes a problem over sign vectors x = (1; 2z - e) with one extra
# homogenizing coordinate, so p = n + 1. The constant eᵀAe / 4 is kept
# on the instance and added back when the objective is reported.

# %%
import numpy as np

from dcfac import brute_force, build_ubqp, objective_at_binary, parse_orlib, solve

text = """1
4 6
1 1 3
2 2 -2
3 3 1
1 2 4
2 4 -5
3 4 2
"""
((n, A),) = parse_orlib(text)
print(A.toarray())  # the off-diagonal entries are mirrored

obj, inst = build_ubqp(A, name="toy")
print("offset eᵀAe/4 =", inst.objective_offset)

# %% Every z gives the same value through the reformulation
for z in ([0, 0, 0, 0], [1, 1, 0, 0], [1, 0, 1, 1]):
    z = np.array(z, dtype=float)
    x = np.concatenate([[1.0], 2 * z - 1])
    print(z.astype(int), z @ A.toarray() @ z, objective_at_binary(inst, x))

# %% Solve and read back the 0/1 solution
rep = solve(obj, inst)
print("solver:", rep.obj, rep.solution(inst), " exact:", brute_force(inst).opt_value)

# %% Flipping the sign of x does not change the answer: the first coordinate
# is normalized to +1 before decoding
print(objective_at_binary(inst, rep.x_binary), objective_at_binary(inst, -rep.x_binary))
