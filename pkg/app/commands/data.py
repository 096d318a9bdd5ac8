"""
Data commands: prep, eda, split.

Every modeling command starts from the same place: read the extract, run the cleaning
recipe (a no-op on already-cleaned files), build factor specs over the full cleaned table,
then split with the configured seed. Specs therefore never depend on the partition.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from app.config import RunConfig
from app.errors import InputError
from app.models.design import SplitSpec
from app.models.reports import CleaningReport, GroupStat
from app.models.table import FactorSpec, RawTable
from app.services import artifacts, diagnostics_service, formatting, ingest_service, preprocess_service
from app.services.design_service import split, split_indices

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Partitions:
    """Cleaned table, its factor specs and the seeded train/test split"""
    table: RawTable = field(repr=False)
    specs: Tuple[FactorSpec, ...]
    report: CleaningReport
    split: SplitSpec
    train_rows: Tuple[int, ...] = field(repr=False)
    test_rows: Tuple[int, ...] = field(repr=False)
    train: RawTable = field(repr=False)
    test: RawTable = field(repr=False)


def load_input(config: RunConfig, path: Optional[Path] = None) -> RawTable:
    """Read a CSV with the configured schema file, or the schema its header implies"""
    path = path or config.input_path
    if path is None:
        raise InputError("No input file given (use --input)")
    schema = ingest_service.load_schema_file(config.schema_path) if config.schema_path else ingest_service.resolve_schema(path)
    return ingest_service.load_csv(path, schema, config.missing_tokens)


def load_cleaned(config: RunConfig) -> Tuple[RawTable, List[FactorSpec], CleaningReport]:
    return preprocess_service.run_recipe(load_input(config))


def split_spec(config: RunConfig) -> SplitSpec:
    return SplitSpec(train_fraction=config.train_fraction, seed=config.seed, train_size=config.train_size)


def prepare_partitions(config: RunConfig) -> Partitions:
    table, specs, report = load_cleaned(config)
    spec = split_spec(config)
    train_rows, test_rows = split_indices(table.n_rows, spec)
    train, test = split(table, spec)
    return Partitions(
        table=table,
        specs=tuple(specs),
        report=report,
        split=spec,
        train_rows=tuple(train_rows),
        test_rows=tuple(test_rows),
        train=train,
        test=test,
    )


# ============================================
# prep
# ============================================

def write_prep(out: Path, table: RawTable, specs: List[FactorSpec], report: CleaningReport) -> List[Path]:
    return [
        ingest_service.write_csv(table, out / "cleaned.csv"),
        artifacts.write_json(out / "cleaning_report.json", report),
        artifacts.write_json(out / "factor_specs.json", [s.model_dump(mode="json") for s in specs]),
    ]


def cmd_prep(config: RunConfig) -> List[Path]:
    """Cleaned CSV, cleaning report and factor specs"""
    table, specs, report = load_cleaned(config)
    written = write_prep(config.output_dir, table, list(specs), report)
    logger.info(f"✅ prep: {report.rows_out} rows written to {written[0]}")
    return written


# ============================================
# eda
# ============================================

def group_tables(table: RawTable, target: str) -> Dict[str, Dict[str, GroupStat]]:
    return {by: diagnostics_service.group_means(table, by, target) for by in table.categorical_columns()}


def write_eda(out: Path, table: RawTable, response: str) -> List[Path]:
    summaries = [ingest_service.column_summary(table, name) for name in table.column_names]
    groups = group_tables(table, response) if table.n_rows else {}

    group_text = []
    overall = diagnostics_service.overall_stat(table, response)
    if overall is not None:
        group_text.append(f"ALL: mean {overall.mean:.6f}, median {overall.median:g}, n {overall.n}\n")
    group_text.extend(formatting.group_table(by, response, stats) for by, stats in groups.items())

    names = table.count_columns()
    written = [
        artifacts.atomic_write_text(out / "summary.txt", formatting.summary_grid(summaries)),
        artifacts.atomic_write_text(out / "group_means.txt", "\n".join(group_text)),
        artifacts.write_json(
            out / "group_means.json",
            {by: {level: stat.model_dump() for level, stat in stats.items()} for by, stats in groups.items()},
        ),
    ]

    if table.n_rows >= 2:
        matrix = diagnostics_service.correlation_matrix(table, names)
        rows = [[name] + [float(v) for v in matrix.loc[name]] for name in names]
        written.append(artifacts.write_numeric_csv(out / "correlation.csv", ["column"] + names, rows))
    else:
        written.append(artifacts.write_numeric_csv(out / "correlation.csv", ["column"] + names, []))

    distribution = diagnostics_service.response_distribution(table, response)
    written.append(artifacts.write_numeric_csv(out / f"{response}_distribution.csv", [response, "count"], distribution))
    return written


def cmd_eda(config: RunConfig) -> List[Path]:
    """
    Descriptive summary grid, group tables of the response by every factor, the
    correlation matrix of numeric columns and the response distribution.

    An empty input yields a headers-only report.
    """
    table = load_input(config)
    if table.n_rows:
        table, _, _ = preprocess_service.run_recipe(table)
    written = write_eda(config.output_dir, table, config.response)
    logger.info(f"✅ eda: {len(written)} artifact(s) written to {config.output_dir}")
    return written


# ============================================
# split
# ============================================

def partition_means(parts: Partitions, response: str) -> Dict[str, float]:
    """Mean response over the train rows, the test rows and the whole cleaned table"""
    return {
        "train_mean": diagnostics_service.overall_stat(parts.train, response).mean,
        "test_mean": diagnostics_service.overall_stat(parts.test, response).mean,
        "all_mean": diagnostics_service.overall_stat(parts.table, response).mean,
    }


def write_split(out: Path, parts: Partitions, response: str) -> List[Path]:
    document = {
        "seed": parts.split.seed,
        "train_fraction": parts.split.train_fraction,
        "train_size": len(parts.train_rows),
        "test_size": len(parts.test_rows),
        **partition_means(parts, response),
        # 1-based row numbers in the cleaned table
        "train_rows": [i + 1 for i in parts.train_rows],
        "test_rows": [i + 1 for i in parts.test_rows],
    }
    return [
        ingest_service.write_csv(parts.train, out / "train.csv"),
        ingest_service.write_csv(parts.test, out / "test.csv"),
        artifacts.write_json(out / "split.json", document),
    ]


def cmd_split(config: RunConfig) -> List[Path]:
    parts = prepare_partitions(config)
    written = write_split(config.output_dir, parts, config.response)
    logger.info(f"✅ split: {len(parts.train_rows)} train / {len(parts.test_rows)} test")
    return written
