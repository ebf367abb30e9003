from pathlib import Path
from typing import List, Sequence

from loguru import logger

from catvae.controllers.artifacts import ArtifactStore
from catvae.core.config import Settings
from catvae.core.errors import DataError
from catvae.ml.data import load_csv
from catvae.ml.metrics import build_report, evaluate_system, report_frame
from catvae.schemas.reports import MetricsReport


class EvaluationController:
    def __init__(self, settings: Settings):
        self.settings = settings

    @staticmethod
    def system_names(paths: Sequence[Path]) -> List[str]:
        names, seen = [], {}
        for path in paths:
            stem = Path(path).stem
            seen[stem] = seen.get(stem, 0) + 1
            names.append(stem if seen[stem] == 1 else f"{stem}_{seen[stem]}")
        return names

    def evaluate(self, data: Path, test: Path, synths: Sequence[Path], out: Path) -> MetricsReport:
        if not synths:
            raise DataError("evaluate needs at least one synthetic dataset")
        train = load_csv(data)
        real_test = load_csv(test, schema=train.schema)
        systems = []
        for name, path in zip(self.system_names(synths), synths):
            synth = load_csv(path, schema=train.schema)
            systems.append(evaluate_system(name, train, real_test, synth, self.settings.metrics))
        report = build_report(systems)
        store = ArtifactStore(out).ensure()
        store.write_text("metrics.json", report.model_dump_json(indent=2))
        report_frame(report).to_csv(store.path("metrics.csv"), index=False, lineterminator="\n")
        logger.info(f"Average ranks: {report.average_rank}")
        return report
