"""
Human-readable text reports: coefficient summaries, descriptive grids and group tables.
"""

import math
from typing import Dict, List, Optional, Sequence

from app.models.glm import Family, GlmFit
from app.models.reports import ColumnSummary, FiveNumberSummary, GroupStat
from app.models.table import ColumnKind
from app.services import glm_service

SIGNIF_CODES = "Signif. codes:  0 '***' 0.001 '**' 0.01 '*' 0.05 '.' 0.1 ' ' 1"

# Levels shown per categorical column in the descriptive grid before folding into (Other)
MAX_LEVELS_SHOWN = 6


def significance_stars(p_value: float) -> str:
    if p_value < 0.001:
        return "***"
    if p_value < 0.01:
        return "**"
    if p_value < 0.05:
        return "*"
    if p_value < 0.1:
        return "."
    return ""


def format_p_value(p_value: float) -> str:
    if p_value < 2e-16:
        return "< 2e-16"
    if p_value < 1e-4:
        return f"{p_value:.2e}"
    return f"{p_value:.6f}"


def _table(rows: List[List[str]], left_columns: int = 1) -> List[str]:
    """Right-aligned columns, except the first ``left_columns`` which are left-aligned"""
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    lines = []
    for row in rows:
        cells = [
            cell.ljust(widths[i]) if i < left_columns else cell.rjust(widths[i])
            for i, cell in enumerate(row)
        ]
        lines.append(" ".join(cells).rstrip())
    return lines


def _family_call(family: Family) -> str:
    if family == Family.POISSON_LOG:
        return 'poisson(link = "log")'
    return 'gaussian(link = "identity")'


def coefficient_summary(
    fit: GlmFit,
    formula: str,
    residuals: Optional[FiveNumberSummary] = None,
    explain: bool = False,
) -> str:
    """
    Coefficient table with estimate, standard error, z, p-value and significance stars,
    followed by deviance and information-criterion lines.

    Args:
        fit: fitted model
        formula: "days ~ a + b" form of the model
        residuals: five-number summary of the training deviance residuals
        explain: add the multiplicative factor exp(beta) per coefficient

    Returns:
        Report text ending in a newline
    """
    lines: List[str] = []
    if not fit.converged:
        lines.append(f"WARNING: IRLS did not converge in {fit.iterations} iteration(s); estimates are unreliable")
        lines.append("")

    lines.append("Call:")
    lines.append(f"glm(formula = {formula}, family = {_family_call(fit.family)})")
    lines.append("")

    if residuals is not None:
        lines.append("Deviance Residuals:")
        values = [residuals.min, residuals.q1, residuals.median, residuals.q3, residuals.max]
        lines.extend(_table([["Min", "1Q", "Median", "3Q", "Max"], [f"{v:.4f}" for v in values]], left_columns=0))
        lines.append("")

    statistic = "z value" if fit.family == Family.POISSON_LOG else "t value"
    header = ["", "Estimate", "Std. Error", statistic, "Pr(>|z|)", ""]
    if explain:
        header.insert(2, "exp(Estimate)")
    rows = [header]
    for row in glm_service.wald_inference(fit):
        cells = [
            row.name,
            f"{row.estimate:.7g}",
            f"{row.std_error:.7g}",
            f"{row.z:.3f}",
            format_p_value(row.p_value),
            significance_stars(row.p_value),
        ]
        if explain:
            cells.insert(2, f"{math.exp(row.estimate):.7g}")
        rows.append(cells)

    lines.append("Coefficients:")
    lines.extend(_table(rows))
    lines.append("---")
    lines.append(SIGNIF_CODES)
    lines.append("")

    if fit.family == Family.POISSON_LOG:
        lines.append("(Dispersion parameter for poisson family taken to be 1)")
    else:
        lines.append(f"(Dispersion parameter for gaussian family taken to be {fit.dispersion:.7g})")
    lines.append("")
    lines.append(f"    Null deviance: {fit.null_deviance:.2f}  on {fit.df_null}  degrees of freedom")
    lines.append(f"Residual deviance: {fit.deviance:.2f}  on {fit.df_residual}  degrees of freedom")
    lines.append(f"AIC: {glm_service.aic(fit):.2f}")
    lines.append(f"BIC: {glm_service.bic(fit):.2f}")
    lines.append("")
    lines.append(f"Number of IRLS iterations: {fit.iterations}")
    return "\n".join(lines) + "\n"


def _number(value: Optional[float]) -> str:
    if value is None:
        return "NA"
    return f"{value:.2f}"


def _summary_cells(summary: ColumnSummary) -> List[str]:
    if summary.kind == ColumnKind.CATEGORICAL:
        levels = list((summary.levels or {}).items())
        shown = levels[:MAX_LEVELS_SHOWN]
        cells = [f"{level}:{count}" for level, count in shown]
        other = sum(count for _, count in levels[MAX_LEVELS_SHOWN:])
        if other:
            cells.append(f"(Other):{other}")
    else:
        cells = [
            f"Min.   :{_number(summary.min)}",
            f"1st Qu.:{_number(summary.q1)}",
            f"Median :{_number(summary.median)}",
            f"Mean   :{_number(summary.mean)}",
            f"3rd Qu.:{_number(summary.q3)}",
            f"Max.   :{_number(summary.max)}",
        ]
    if summary.n_missing:
        cells.append(f"NA's   :{summary.n_missing}")
    return cells


def summary_grid(summaries: Sequence[ColumnSummary], columns_per_block: int = 4) -> str:
    """
    Side-by-side descriptive summary of every column; an empty table prints the
    column headers only.
    """
    lines: List[str] = []
    for start in range(0, len(summaries), columns_per_block):
        block = summaries[start:start + columns_per_block]
        cells = [_summary_cells(s) if s.n else [] for s in block]
        widths = [max([len(s.name)] + [len(c) for c in col]) for s, col in zip(block, cells)]
        lines.append("  ".join(s.name.center(w) for s, w in zip(block, widths)).rstrip())
        depth = max(len(col) for col in cells)
        for i in range(depth):
            row = [(col[i] if i < len(col) else "").ljust(w) for col, w in zip(cells, widths)]
            lines.append("  ".join(row).rstrip())
        lines.append("")
    return "\n".join(lines)


def group_table(by: str, target: str, groups: Dict[str, GroupStat]) -> str:
    rows = [[by, "mean", "median", "n"]]
    for level, stat in groups.items():
        rows.append([level, f"{stat.mean:.2f}", f"{stat.median:g}", str(stat.n)])
    return f"{target} by {by}\n" + "\n".join(_table(rows)) + "\n"
