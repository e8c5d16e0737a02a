"""Plot-ready whitespace-separated text files derived from a run bundle.

Every file carries a ``#`` header naming its columns, so gnuplot, pgfplots
or ``numpy.loadtxt`` read them directly.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from blowuplab.writers import Bundle, load_bundle

logger = logging.getLogger(__name__)

PLOT_DIR = "plot"


@dataclass
class PlotData:
    """Files written by :func:`emit_plot_data` and the inputs it had to skip."""

    out_dir: Path
    files: list[Path] = field(default_factory=list)
    notices: list[str] = field(default_factory=list)


def emit_plot_data(bundle_dir: Path, out_dir: Path | None = None) -> PlotData:
    """Write plot data for every figure the bundle has inputs for.

    Produces ``curve.dat`` (r, T), ``lyapunov_<tag>.dat`` (s, E, F, H),
    ``residual_<tag>.dat`` (s, log10 of the single and multi residuals),
    ``zeta_<tag>.dat`` (log s, ζ₁..ζ_k) and ``corner_<tag>.dat``
    (1/|log|r−r₀||, T′ ± 1).

    Args:
        bundle_dir: Directory written by ``run``.
        out_dir: Target directory, ``<bundle_dir>/plot`` by default.

    Raises:
        FileNotFoundError: If ``bundle_dir`` does not exist.
    """
    bundle = load_bundle(bundle_dir)
    result = PlotData(out_dir=out_dir or bundle_dir / PLOT_DIR)
    if bundle.empty:
        result.notices.append(f"bundle {bundle_dir} holds no curve, trace, fit or corner data")
        return result

    _curve(bundle, result)
    for tag, rows in bundle.traces.items():
        _save(
            result,
            f"lyapunov_{tag}.dat",
            _columns(rows, ("s", "E", "F", "H")),
            "s E F H",
        )
    for tag, rows in bundle.fits.items():
        _residuals(tag, rows, result)
        _zetas(tag, rows, result)
    for tag, rows in bundle.corner.items():
        _save(
            result,
            f"corner_{tag}.dat",
            _corner(rows),
            "inv_abs_log_gap slope_excess",
        )

    tags = set(bundle.traces) | set(bundle.fits)
    for tag in sorted(tags - set(bundle.traces)):
        result.notices.append(f"{tag}: no Lyapunov trace, skipped lyapunov_{tag}.dat")
    for tag in sorted(tags - set(bundle.fits)):
        result.notices.append(f"{tag}: no fits, skipped residual_{tag}.dat and zeta_{tag}.dat")
    for notice in result.notices:
        logger.info(notice)
    return result


def _curve(bundle: Bundle, result: PlotData) -> None:
    if not bundle.curve:
        result.notices.append("curve.csv missing or empty, skipped curve.dat")
        return
    _save(result, "curve.dat", _columns(bundle.curve, ("r", "T")), "r T")


def _residuals(tag: str, rows: list[dict[str, str]], result: PlotData) -> None:
    table = [
        (
            _number(row.get("s")),
            _log10(_number(row.get("single_residual"))),
            _log10(_number(row.get("residual"))),
        )
        for row in rows
    ]
    _save(
        result,
        f"residual_{tag}.dat",
        np.array(table, dtype=float).reshape(-1, 3),
        "s log10_single_residual log10_multi_residual",
    )


def _zetas(tag: str, rows: list[dict[str, str]], result: PlotData) -> None:
    usable = [row for row in rows if row.get("k") and _number(row.get("s")) > 0.0]
    if not usable:
        result.notices.append(f"{tag}: no multi-soliton fits at s > 0, skipped zeta_{tag}.dat")
        return
    k = max(int(row["k"]) for row in usable)
    if k == 0:
        result.notices.append(f"{tag}: selected k = 0, skipped zeta_{tag}.dat")
        return
    table = [
        [math.log(_number(row["s"]))] + [_number(row.get(f"zeta{i}")) for i in range(1, k + 1)]
        for row in usable
    ]
    header = "log_s " + " ".join(f"zeta{i}" for i in range(1, k + 1))
    _save(result, f"zeta_{tag}.dat", np.array(table, dtype=float), header)


def _corner(rows: list[dict[str, str]]) -> np.ndarray:
    table = []
    for row in rows:
        gap = _number(row.get("gap"))
        if not gap > 0.0 or gap >= 1.0:
            continue
        table.append((1.0 / abs(math.log(gap)), _number(row.get("slope_excess"))))
    return np.array(table, dtype=float).reshape(-1, 2)


def _columns(rows: list[dict[str, str]], names: Sequence[str]) -> np.ndarray:
    return np.array(
        [[_number(row.get(name)) for name in names] for row in rows], dtype=float
    ).reshape(-1, len(names))


def _save(result: PlotData, name: str, table: np.ndarray, header: str) -> None:
    path = result.out_dir / name
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, table, fmt="%.10g", header=header)
    result.files.append(path)


def _number(text: str | None) -> float:
    if text is None or text == "":
        return math.nan
    try:
        return float(text)
    except ValueError:
        return math.nan


def _log10(value: float) -> float:
    return math.log10(value) if value > 0.0 and math.isfinite(value) else math.nan
