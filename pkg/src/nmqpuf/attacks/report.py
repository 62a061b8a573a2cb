"""Attack reports and the shared accuracy/split helpers."""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, fields

import numpy as np

from ..dataset import CrpDataset, config_digest


@dataclass(frozen=True)
class AttackReport:
    kind: str
    architecture: str
    g: int
    k: int
    n: int
    crp_budget: int
    n_train: int
    n_test: int
    accuracy: float
    wall_seconds: float
    seed: int
    config_digest: str
    overlap: int = 0
    failed: bool = False
    notes: str = ""

    def __post_init__(self):
        if self.overlap != 0:
            raise ValueError(f"{self.overlap} test challenges also appear in the training set")
        if not 0.0 <= self.accuracy <= 1.0 and not np.isnan(self.accuracy):
            raise ValueError(f"accuracy {self.accuracy} outside [0, 1]")

    @classmethod
    def csv_header(cls) -> str:
        return ",".join(f.name for f in fields(cls))

    def csv_row(self) -> str:
        out = io.StringIO()
        csv.writer(out, lineterminator="").writerow(asdict(self).values())
        return out.getvalue()

    def to_text(self) -> str:
        width = max(len(f.name) for f in fields(self))
        return "\n".join(f"{k:<{width}} : {v}" for k, v in asdict(self).items())

    def table_line(self) -> str:
        target = self.architecture if self.k == 1 else f"{self.k}-{self.architecture}"
        if self.g:
            target += f" (g={self.g})"
        return f"{target:<28} {self.kind:<8} {self.crp_budget:>9} CRPs  {100 * self.accuracy:6.2f} %  {self.wall_seconds:8.1f} s"

    def same_result(self, other: "AttackReport") -> bool:
        """Field-wise equality ignoring wall-clock time."""
        a, b = asdict(self), asdict(other)
        a.pop("wall_seconds"), b.pop("wall_seconds")
        return a == b


def challenge_overlap(train: CrpDataset, test: CrpDataset) -> int:
    return int(np.isin(np.unique(test.packed), np.unique(train.packed)).sum())


def evaluate_accuracy(model, test: CrpDataset) -> float:
    """Fraction of test records whose response the model predicts."""
    if len(test) == 0:
        raise ValueError("empty test set")
    return float(np.mean(model.predict(test.challenges) == test.responses))


def make_report(kind, model, train: CrpDataset, test: CrpDataset, seed, settings, wall, failed=False, notes=""):
    h = train.header
    return AttackReport(
        kind=kind, architecture=h.architecture, g=h.g, k=h.k, n=h.n,
        crp_budget=len(train), n_train=len(train), n_test=len(test),
        accuracy=evaluate_accuracy(model, test) if not failed or model is not None else float("nan"),
        wall_seconds=round(wall, 3), seed=seed,
        config_digest=f"{config_digest(h.describe(), test.header.describe(), kind, seed, *settings):016x}",
        overlap=challenge_overlap(train, test), failed=failed, notes=notes,
    )


class OracleModel:
    """Predicts with a copy of the target itself; useful as an upper reference."""

    def __init__(self, puf):
        self.puf = puf

    def predict(self, challenges):
        return self.puf.evaluate(challenges)


class ConstantModel:
    def __init__(self, bit: int):
        self.bit = int(bit)

    def predict(self, challenges):
        return np.full(len(challenges), self.bit, dtype=np.uint8)
