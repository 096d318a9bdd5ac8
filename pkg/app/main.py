"""
Command-line entry point: ``python -m app <command> [flags]``.

Exit codes: 0 success, 2 input/validation error, 3 schema or level mismatch,
4 numerical failure, 1 anything unexpected.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

from app.commands import data, evaluate, model, pipeline
from app.config import RunConfig, settings
from app.errors import LosError
from app.models.glm import Criterion, Family

logger = logging.getLogger(__name__)

LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]

COMMANDS: Dict[str, Callable[[RunConfig], List[Path]]] = {
    "prep": data.cmd_prep,
    "eda": data.cmd_eda,
    "split": data.cmd_split,
    "fit": model.cmd_fit,
    "select": model.cmd_select,
    "diagnose": evaluate.cmd_diagnose,
    "predict": evaluate.cmd_predict,
    "report": pipeline.cmd_report,
}

HELP = {
    "prep": "clean the extract and write cleaned.csv with its cleaning report",
    "eda": "descriptive summary, group tables and correlations",
    "split": "seeded train/test partition",
    "fit": "fit the configured terms on the train partition",
    "select": "forward stepwise selection on the train partition",
    "diagnose": "fit metrics, Pearson statistics and residual plot data of a saved model",
    "predict": "predicted means for new encounters",
    "report": "run the whole analysis into one directory",
}


def _terms(value: str) -> List[str]:
    return [t.strip() for t in value.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="los-glm", description="Poisson GLM toolkit for inpatient length of stay")
    subparsers = parser.add_subparsers(dest="command", required=True)

    # Flags default to None so that config-file values survive unless overridden
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", dest="input_path", type=Path, help="encounter CSV")
    common.add_argument("--output-dir", dest="output_dir", type=Path, help="artifact directory")
    common.add_argument("--config", dest="config_path", type=Path, help="JSON file mirroring the run configuration")
    common.add_argument("--schema", dest="schema_path", type=Path, help="JSON column schema override")
    common.add_argument("--seed", type=int)
    common.add_argument("--train-fraction", dest="train_fraction", type=float)
    common.add_argument("--train-size", dest="train_size", type=int)
    common.add_argument("--family", choices=[f.value for f in Family])
    common.add_argument("--criterion", choices=[c.value for c in Criterion])
    common.add_argument("--terms", type=_terms, help="comma-separated predictors (default: all)")
    common.add_argument("--response")
    common.add_argument("--jobs", type=int, help="worker threads for stepwise candidate fits")
    common.add_argument("--max-iterations", dest="max_iterations", type=int)
    common.add_argument("--tolerance", type=float)
    common.add_argument("--log-level", dest="log_level", type=str.upper, choices=LOG_LEVELS, default=settings.LOG_LEVEL)

    for name in COMMANDS:
        sub = subparsers.add_parser(name, parents=[common], help=HELP[name])
        if name in ("fit", "select", "predict", "report"):
            sub.add_argument("--explain", action="store_true", default=None, help="add exp(beta) factors")
        if name == "fit":
            sub.add_argument("--dump-matrix", dest="dump_matrix", action="store_true", default=None, help="also write the train design matrix")
        if name in ("diagnose", "predict"):
            sub.add_argument("--model", dest="model_path", type=Path, help="model.json from fit or select")
        if name == "predict":
            sub.add_argument("--newdata", dest="newdata_path", type=Path, help="cleaned CSV of new encounters")
    return parser


def run(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    overrides: Dict[str, Any] = {k: v for k, v in vars(args).items() if k not in ("command", "config_path", "log_level")}

    logging.basicConfig(
        level=args.log_level.upper(),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
    )
    logging.captureWarnings(True)

    try:
        config = RunConfig.from_sources(args.config_path, overrides)
        COMMANDS[args.command](config)
    except LosError as e:
        logger.error(f"❌ {type(e).__name__}: {e}")
        return e.exit_code
    except FileNotFoundError as e:
        logger.error(f"❌ {e}")
        return 2
    except Exception:
        logger.exception("❌ Unexpected error")
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
