"""Dataset files: named variables, each with fuzzy observations and a category bank.

Layout::

    {"format": "fuzzcor/1",
     "variables": {"X1": {"observations": [{"xl": .., "c1": .., "c2": .., "xu": ..}, 3.0, ...],
                          "categories":   [{"xl": ..}, ...]},
                   ...}}

``variables`` may also be a list of objects carrying a ``"name"`` key.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .counting import FORMAT, FuzzyFrequencyTable, build_table
from .errors import FuzzcorError, InvalidFuzzyNumber, LengthMismatch, PartitionInvalid
from .fuzzy import FuzzyNumber, FuzzyPartition, sample_range, validate_partition


class SchemaError(FuzzcorError, ValueError):
    """Input file does not follow the expected layout."""


@dataclass
class Variable:
    name: str
    observations: list[FuzzyNumber]
    categories: FuzzyPartition


@dataclass
class DatasetFile:
    variables: dict[str, Variable]

    @property
    def names(self) -> list[str]:
        return list(self.variables)

    @property
    def sample_size(self) -> int:
        return len(next(iter(self.variables.values())).observations)

    def validate(self, tol: float = 1e-8) -> None:
        """Check every bank over its variable's sample range; errors name the variable."""
        for v in self.variables.values():
            part = FuzzyPartition(v.categories.granules, sample_range(v.observations))
            try:
                validate_partition(part, tol=tol)
            except PartitionInvalid as exc:
                granule = None
                if exc.worst_x is not None:
                    m = part.memberships(exc.worst_x)[:, 0]
                    granule = int(m.argmax()) + 1 if m.max() > 0 else None
                where = f" (granule {granule})" if granule is not None else ""
                raise PartitionInvalid(f"variable {v.name!r}{where}: {exc}", exc.worst_x,
                                       exc.deviation, granule) from exc

    def table(self, j: str, k: str, normalize: bool = False, jobs: int = 1) -> FuzzyFrequencyTable:
        vj, vk = self._get(j), self._get(k)
        tab = build_table(vj.observations, vk.observations, vj.categories, vk.categories,
                          normalize=normalize, validate=False, jobs=jobs)
        tab.meta = {"pair": [j, k]}
        return tab

    def _get(self, name: str) -> Variable:
        try:
            return self.variables[name]
        except KeyError:
            raise SchemaError(f"unknown variable {name!r}; have {self.names}") from None

    def pairs(self) -> list[tuple[str, str]]:
        names = self.names
        return [(a, b) for i, a in enumerate(names) for b in names[i + 1:]]

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "variables": {
                v.name: {"observations": [o.to_dict() for o in v.observations],
                         "categories": v.categories.to_list()}
                for v in self.variables.values()
            },
        }

    @classmethod
    def from_dict(cls, d) -> "DatasetFile":
        if not isinstance(d, dict) or "variables" not in d:
            raise SchemaError("dataset must be an object with a 'variables' entry")
        fmt = d.get("format", FORMAT)
        if fmt != FORMAT:
            raise SchemaError(f"unsupported format {fmt!r}, expected {FORMAT!r}")
        raw = d["variables"]
        if isinstance(raw, list):
            try:
                raw = {item["name"]: item for item in raw}
            except (TypeError, KeyError):
                raise SchemaError("variables given as a list must each carry a 'name'") from None
        if not isinstance(raw, dict) or not raw:
            raise SchemaError("'variables' must be a non-empty object or list")
        out = {}
        for name, spec in raw.items():
            if not isinstance(spec, dict) or "observations" not in spec or "categories" not in spec:
                raise SchemaError(f"variable {name!r} needs 'observations' and 'categories'")
            try:
                obs = [FuzzyNumber.from_obj(o) for o in spec["observations"]]
            except (InvalidFuzzyNumber, TypeError, ValueError) as exc:
                raise SchemaError(f"variable {name!r}: bad observation: {exc}") from None
            cats = []
            for g, o in enumerate(spec["categories"], start=1):
                try:
                    cats.append(FuzzyNumber.from_obj(o))
                except (InvalidFuzzyNumber, TypeError, ValueError) as exc:
                    raise SchemaError(f"variable {name!r}, granule {g}: {exc}") from None
            if not obs:
                raise SchemaError(f"variable {name!r} has no observations")
            if not cats:
                raise SchemaError(f"variable {name!r} has no categories")
            out[str(name)] = Variable(str(name), obs, FuzzyPartition(cats))
        sizes = {len(v.observations) for v in out.values()}
        if len(sizes) != 1:
            raise LengthMismatch(f"variables have different observation counts: {sorted(sizes)}")
        return cls(out)

    @classmethod
    def load(cls, path) -> "DatasetFile":
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON: {exc}") from None
        return cls.from_dict(d)
