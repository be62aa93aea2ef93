"""Household covariates that drive the household network.

Columns (one household per row in the CSV form):

- municipality (int): municipality code
- barangay (int): village code, unique across municipalities
- roof, wall (int): 0 none, 1 light, 2 strong
- edu (float): years of schooling of the household head
- assets (int): durable assets owned, 0 to 4
- watersan (int): water and sanitation access level, 0 to 2
- school (int): school-age children, 0 to 3
- income (float): log monthly income
- hhsize (int): number of household members
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError

__all__ = ["HouseholdCovariates", "synthetic_covariates", "read_covariates", "write_covariates"]

_INT_COLUMNS = ("municipality", "barangay", "roof", "wall", "assets", "watersan", "school", "hhsize")


@dataclass(frozen=True, eq=False)
class HouseholdCovariates:
    municipality: np.ndarray
    barangay: np.ndarray
    roof: np.ndarray
    wall: np.ndarray
    edu: np.ndarray
    assets: np.ndarray
    watersan: np.ndarray
    school: np.ndarray
    income: np.ndarray
    hhsize: np.ndarray

    def __post_init__(self) -> None:
        sizes = {f.name: np.asarray(getattr(self, f.name)).shape for f in fields(self)}
        if len({s for s in sizes.values()}) != 1 or len(next(iter(sizes.values()))) != 1:
            raise ConfigurationError(f"covariate columns must be 1-d and equally long, got {sizes}")
        if self.n == 0:
            raise ConfigurationError("covariate set is empty")
        for f in fields(self):
            kind = int if f.name in _INT_COLUMNS else float
            object.__setattr__(self, f.name, np.asarray(getattr(self, f.name), dtype=kind))

    @property
    def n(self) -> int:
        return int(np.asarray(self.municipality).shape[0])

    def subset(self, idx: np.ndarray) -> "HouseholdCovariates":
        return HouseholdCovariates(**{f.name: getattr(self, f.name)[idx] for f in fields(self)})


def synthetic_covariates(
    n_households: int,
    rng: np.random.Generator,
    n_municipalities: int = 5,
    barangays_per_municipality: int = 10,
    hhsize: np.ndarray | None = None,
) -> HouseholdCovariates:
    """Draw covariates with village-level wealth effects so that features cluster by location."""
    if n_households < 1:
        raise ConfigurationError("need at least one household")
    n_bgy = n_municipalities * barangays_per_municipality
    bgy = rng.integers(0, n_bgy, size=n_households)
    mun = bgy // barangays_per_municipality
    village_wealth = rng.normal(0.0, 0.6, size=n_bgy)
    wealth = village_wealth[bgy] + rng.normal(0.0, 1.0, size=n_households)

    def ordinal(signal, cuts):
        return np.searchsorted(cuts, signal + rng.normal(0.0, 0.7, size=signal.shape))

    roof = ordinal(wealth, [-0.8, 0.6])
    wall = ordinal(wealth, [-0.5, 0.9])
    edu = np.clip(5.0 + 1.5 * wealth + rng.normal(0.0, 2.0, size=n_households), 0.0, 16.0)
    assets = np.clip(np.round(1.5 + 0.9 * wealth + rng.normal(0.0, 0.8, size=n_households)), 0, 4)
    watersan = ordinal(wealth, [-0.3, 1.0])
    if hhsize is None:
        hhsize = rng.integers(3, 8, size=n_households)
    school = np.minimum(rng.binomial(np.maximum(np.asarray(hhsize) - 2, 0), 0.4), 3)
    income = 7.0 + 0.5 * wealth + rng.normal(0.0, 0.5, size=n_households)
    return HouseholdCovariates(mun, bgy, roof, wall, edu, assets, watersan, school, income, np.asarray(hhsize))


def read_covariates(path: str | Path) -> HouseholdCovariates:
    """Read a comma-delimited file with a header naming the columns listed in the module docstring."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"covariate file not found: {path}")
    names = [f.name for f in fields(HouseholdCovariates)]
    cols: dict[str, list[float]] = {k: [] for k in names}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(names) - set(reader.fieldnames or [])
        if missing:
            raise ConfigurationError(f"covariate file {path} lacks columns {sorted(missing)}")
        for row in reader:
            for k in names:
                cols[k].append(float(row[k]))
    if not cols[names[0]]:
        raise ConfigurationError(f"covariate file {path} has no rows")
    return HouseholdCovariates(**{k: np.array(v) for k, v in cols.items()})


def write_covariates(cov: HouseholdCovariates, path: str | Path) -> None:
    names = [f.name for f in fields(HouseholdCovariates)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for row in zip(*(getattr(cov, k) for k in names)):
            writer.writerow([repr(float(v)) if isinstance(v, np.floating) else int(v) for v in row])
