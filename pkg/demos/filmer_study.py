# %% [markdown]
# # Household model on a village network
#
# Structural truth first, then a short simulation. Use 200 replications for
# publication-grade numbers; 20 keeps this demo under a minute.

# %%
from dataclasses import replace

from pseudotrue import run_study
from pseudotrue.config import filmer_defaults
from pseudotrue.environments import FilmerParams, filmer_targets

t = filmer_targets(FilmerParams(), 0.5)
print(f"price={t.p_star:.4f} ade={t.ade:.4f} local={t.aie_local:.4f} global={t.aie_global:.4f}")

# %%
summary = run_study(replace(filmer_defaults(), reps=20))
[(r.estimand, round(r.mean, 3), round(r.sd, 3)) for r in summary.rows]
