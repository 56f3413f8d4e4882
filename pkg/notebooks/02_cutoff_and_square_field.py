# %% [markdown]
# # Dyadic cutoff and the square-field product bound
#
# chi[a] equals 1 when every ball U_{2^r} holds at most a_r points and drops
# to 0 once some ball is heavily overfilled.  Multiplying a test function by
# chi costs at most a factor 2 in the square field, which we check here on
# a few configurations near the edge of M[a].

# %%
import numpy as np

from jumpips import Configuration, Domain, KernelSpec
from jumpips import functionals as fn

a = fn.CutoffSequence(1, 1, 0.0)
print([a(r) for r in range(1, 5)])

# %%
# fill U_2 up to the edge and then beyond it
rng = np.random.default_rng(0)
for k in (1, 2, 3, 4, 6, 9):
    pts = rng.uniform(-2, 2, (k, 1))
    print(k, "in M[a]:", fn.in_M_a(pts, a), " d_a = %.3f" % fn.d_a(pts, a), " chi = %.3f" % fn.chi_a(pts, a))

# %%
dom = Domain(1, 4.0)
kernel = KernelSpec(alpha=1.0, r_min=0.05)
chi = fn.CutoffFunction(a)
F = fn.TestFunction([[0.5], [-1.0]], [2.0, 1.5], [0.2, 1.0, -0.7, 0.3, 0.5, 0.1], degree=2)
for seed in range(4):
    rng = np.random.default_rng(seed)
    xi = Configuration(dom, np.concatenate([rng.uniform(-2, 2, (2, 1)), dom.uniform(rng, 1)]))
    M = fn.square_field_matrix([F, chi, chi * F], kernel, xi)
    lhs, rhs = M[2, 2], 2 * (M[1, 1] * F(xi) ** 2 + M[0, 0])
    print(f"D[chi F] = {lhs:.4f}   bound = {rhs:.4f}   D[chi] = {M[1, 1]:.4f}")

# %% [markdown]
# The key-lemma sums behind the constants, next to their closed forms.

# %%
for n in (1, 2, 4):
    r = fn.bound_sums(n, 1, 0.0)
    print(n, f"{r.sum_c2:.3f} <= {r.bound_c2:.3f}", f"{r.sum_c32:.3f} <= {r.bound_c32:.3f}",
          f"{r.sum_c42:.3f} <= {r.bound_c42:.3f}")
