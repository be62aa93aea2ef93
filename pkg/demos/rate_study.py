# %% [markdown]
# # Which channel limits the rate?
#
# Network density and perturbation size both shrink with n. The slower of the
# two indirect channels sets the convergence rate of the total effect.
# Short grids or few replications blur the comparison; this takes about 2 minutes.

# %%
from pseudotrue import StudyConfig
from pseudotrue.config import DEFAULT_GRID
from pseudotrue.montecarlo import rate_study

base = StudyConfig(reps=200)
for kappa, alpha in ((0.49, 0.40), (0.34, 0.26)):
    rep = rate_study(base, kappa, alpha, DEFAULT_GRID)
    fitted = {k: round(v[0], 3) for k, v in rep.slopes.items()}
    print(kappa, alpha, fitted, "predicted:", rep.predicted_dominant, "observed:", rep.observed_dominant)
