import hashlib
from typing import List

from pydantic import Field, model_validator

from catvae.schemas.base import FrozenModel


class ColumnSchema(FrozenModel):
    name: str
    levels: List[str]
    constant: bool = False

    @model_validator(mode="after")
    def check_levels(self) -> "ColumnSchema":
        if len(set(self.levels)) != len(self.levels):
            raise ValueError(f"Column '{self.name}' has duplicate levels")
        if len(self.levels) < 1:
            raise ValueError(f"Column '{self.name}' has no levels")
        # single-level columns are only legal when flagged constant
        if len(self.levels) < 2 and not self.constant:
            raise ValueError(f"Column '{self.name}' needs at least 2 levels unless flagged constant")
        return self

    @property
    def size(self) -> int:
        return len(self.levels)


class DatasetSchema(FrozenModel):
    columns: List[ColumnSchema] = Field(min_length=1)

    @property
    def p(self) -> int:
        return len(self.columns)

    @property
    def sizes(self) -> List[int]:
        return [c.size for c in self.columns]

    @property
    def onehot_width(self) -> int:
        return sum(self.sizes)

    @property
    def offsets(self) -> List[int]:
        offsets, acc = [], 0
        for size in self.sizes:
            offsets.append(acc)
            acc += size
        return offsets

    @property
    def blocks(self) -> List[slice]:
        return [slice(o, o + s) for o, s in zip(self.offsets, self.sizes)]

    @property
    def names(self) -> List[str]:
        return [c.name for c in self.columns]

    @property
    def constant_columns(self) -> List[int]:
        return [j for j, c in enumerate(self.columns) if c.constant]

    def fingerprint(self) -> str:
        """SHA-256 over names and levels; the `constant` flag does not change compatibility."""
        payload = self.model_dump_json(include={"columns": {"__all__": {"name", "levels"}}})
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def compatible_with(self, other: "DatasetSchema") -> bool:
        return self.fingerprint() == other.fingerprint()
