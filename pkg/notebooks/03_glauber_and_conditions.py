# %% [markdown]
# # Birth-death dynamics and the growth conditions on Poisson samples

# %%
import numpy as np
from scipy import stats

from jumpips import Configuration, Domain, PotentialSpec, SimParams, poisson_samples, run_glauber
from jumpips.diagnostics import (estimate_rho1, fit_growth_exponent, poisson_count_test,
                                 rhojump_inequality_check, tail_exponent_fit, variance_ratio_curve)
from jumpips.kernels import EnvelopeSpec

dom = Domain(1, 4.0)

# %% [markdown]
# With no interaction the particle count is an M/M/infinity queue, so in
# equilibrium it is Poisson with mean z|box|.

# %%
z = 1.0
tr = run_glauber(PotentialSpec(), SimParams(horizon=4.0 * 20_050, record_dt=4.0, activity=z, seed=3,
                                            record_events=False), Configuration(dom))
counts = tr.counts()[50:]
print("mean", counts.mean(), "var", counts.var(), "chi-square p", poisson_count_test(counts, z * dom.volume)[1])
print(np.bincount(counts)[:16] / len(counts))
print(stats.poisson.pmf(np.arange(16), z * dom.volume).round(4))

# %% [markdown]
# Hard rods of length 0.4 never overlap, however long we run.

# %%
tr = run_glauber(PotentialSpec(pair="hard_core", radius=0.4), SimParams(horizon=500.0, activity=3.0, seed=4),
                 Configuration(dom))
gaps = [np.diff(np.sort(c.points[:, 0])).min() for c in tr.configurations() if c.n > 1]
print(len(tr), "snapshots, smallest gap", min(gaps))

# %%
samples = poisson_samples(dom, 1.0, 5000, seed=1)
rho1 = estimate_rho1(samples, 8)
print("rho1", rho1.values.round(3), " kappa_hat", fit_growth_exponent(rho1))
curve = variance_ratio_curve(samples, [0.5, 1, 2, 3, 4])
for r, v, e in curve.rows():
    print(f"r={r:3.1f}  Var/E^2={v:.4f} +- {e:.4f}  Poisson {1 / (2 * r):.4f}")
print("delta_hat", curve.delta, "+-", curve.delta_stderr)

# %%
env = EnvelopeSpec(1.0, 0.5)
print(tail_exponent_fit(env, d=1, kappa=0.5))
res = rhojump_inequality_check(rho1, env, (-1.0, 1.0), dom, 0.1)
print("minimal R", res.R_min)
