"""File system repository implementations."""

import json
import logging
from pathlib import Path
from typing import Any, Optional

import numpy as np
import pandas as pd

from models.errors import InputDataError
from models.hmm import HmmParams
from processing.em import EmFit
from simulation.harness import EvalReport

from ..domain.entities import InputTable, MethodResults, ParseDiagnostics, ReadOptions
from ..domain.repositories import ParamsRepository, PairedTableRepository, ReportRepository, ResultsRepository

logger = logging.getLogger(__name__)

NA_TOKENS = {"", "na", "nan", "n/a", "null", "."}
RESULT_COLUMNS = ["feature_id", "p1", "p2", "rlis", "rejected"]
FLOAT_FORMAT = "%.5e"
HEADER_LINE = 1


def _separator(path: Path, sep: Optional[str]) -> str:
    if sep:
        return sep
    return "," if path.suffix.lower() == ".csv" else "\t"


def _undecodable_line(path: Path) -> Optional[int]:
    raw = path.read_bytes()
    try:
        raw.decode("utf-8")
    except UnicodeDecodeError as e:
        return raw.count(b"\n", 0, e.start) + 1
    return None


def read_paired_table(path: Path, options: Optional[ReadOptions] = None) -> InputTable:
    """
    Parse a TSV/CSV table of paired p-values, keeping file order.

    Rows whose p-value is NA are skipped and reported; exact zeros and ones are
    clamped into (0, 1) and counted. Missing columns, non-numeric or
    out-of-range p-values and duplicate ids raise InputDataError with the
    offending line number.
    """
    options = options or ReadOptions()
    path = Path(path)
    if not path.is_file():
        raise InputDataError(f"input file not found: {path}")

    try:
        frame = pd.read_table(path, sep=_separator(path, options.sep), dtype=str, encoding="utf-8", keep_default_na=False, skip_blank_lines=False)
    except pd.errors.EmptyDataError as e:
        raise InputDataError(f"input file {path} is empty", line=HEADER_LINE) from e
    except pd.errors.ParserError as e:
        raise InputDataError(f"could not parse {path}: {e}") from e
    except UnicodeDecodeError as e:
        raise InputDataError(f"{path} is not valid UTF-8 text", line=_undecodable_line(path)) from e
    frame = frame.fillna("")

    required = [options.id_column, options.p1_column, options.p2_column]
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise InputDataError(f"missing required column(s) {missing}; found {list(frame.columns)}", line=HEADER_LINE)

    diagnostics = ParseDiagnostics()
    # data row i sits on file line i + 2
    lines = np.arange(frame.shape[0]) + HEADER_LINE + 1
    keep = np.ones(frame.shape[0], dtype=bool)

    blank = (frame[required] == "").all(axis=1).to_numpy()
    for line in lines[blank]:
        diagnostics.skipped_rows.append((int(line), "blank row"))
    keep &= ~blank

    values = {}
    for column in (options.p1_column, options.p2_column):
        raw = frame[column].str.strip()
        is_na = raw.str.lower().isin(NA_TOKENS).to_numpy() & keep
        for line in lines[is_na]:
            diagnostics.skipped_rows.append((int(line), f"{column} is NA"))
        keep &= ~is_na
        numeric = pd.to_numeric(raw.where(keep, "nan"), errors="coerce").to_numpy(dtype=float)
        bad = keep & ~np.isfinite(numeric)
        if bad.any():
            j = int(np.argmax(bad))
            raise InputDataError(f"non-numeric p-value {frame[column].iloc[j]!r}", line=int(lines[j]), column=column)
        outside = keep & ((numeric < 0.0) | (numeric > 1.0))
        if outside.any():
            j = int(np.argmax(outside))
            raise InputDataError(f"p-value {numeric[j]!r} outside [0, 1]", line=int(lines[j]), column=column)
        values[column] = numeric

    ids = frame[options.id_column].str.strip()
    empty_id = keep & (ids == "").to_numpy()
    if empty_id.any():
        j = int(np.argmax(empty_id))
        raise InputDataError("empty feature id", line=int(lines[j]), column=options.id_column)
    duplicated = ids[keep].duplicated(keep="first")
    if duplicated.any():
        j = int(duplicated.idxmax())
        raise InputDataError(f"duplicate feature id {ids.iloc[j]!r}", line=int(lines[j]), column=options.id_column)
    diagnostics.skipped_rows.sort()

    p1 = values[options.p1_column][keep]
    p2 = values[options.p2_column][keep]
    diagnostics.clamped_zeros = int((p1 == 0.0).sum() + (p2 == 0.0).sum())
    diagnostics.clamped_ones = int((p1 == 1.0).sum() + (p2 == 1.0).sum())
    for arr in (p1, p2):
        arr[arr == 0.0] = options.p_floor
        arr[arr == 1.0] = options.one_ceiling

    chrom = pos = None
    if "chrom" in frame.columns and "pos" in frame.columns:
        positions = pd.to_numeric(frame["pos"][keep], errors="coerce")
        if positions.notna().all():
            chrom = tuple(frame["chrom"][keep].str.strip())
            pos = positions.to_numpy(dtype=float)
        else:
            logger.warning(f"Ignoring non-numeric 'pos' column in {path}")

    table = InputTable(tuple(ids[keep]), p1, p2, source=path, diagnostics=diagnostics, chrom=chrom, pos=pos)
    logger.info(f"Read {table.m} paired p-values from '{path}': {len(diagnostics.skipped_rows)} rows skipped, {diagnostics.clamped_zeros} zeros and {diagnostics.clamped_ones} ones clamped")
    return table


class FileSystemPairedTableRepository(PairedTableRepository):
    """Reads paired p-value tables from disk."""

    def read(self, path: Path, options: ReadOptions) -> InputTable:
        return read_paired_table(path, options)


class FileSystemResultsRepository(ResultsRepository):
    """Writes results as TSV with a JSON sidecar holding full-precision summaries."""

    def write(self, results: MethodResults, out_dir: Path, stem: str) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        frame = pd.DataFrame(
            {
                "feature_id": list(results.feature_ids),
                "p1": results.p1,
                "p2": results.p2,
                "rlis": results.rlis,
                "rejected": np.asarray(results.rejected, dtype=int),
            }
        )
        if results.method != "rlis":
            frame["method"] = results.method
        table_path = out_dir / f"{stem}.tsv"
        frame.to_csv(table_path, sep="\t", index=False, float_format=FLOAT_FORMAT, lineterminator="\n")

        self._dump(out_dir / f"{stem}.json", {"method": results.method, **results.summary})
        logger.info(f"Wrote {results.method} results to '{table_path}'")
        return table_path

    def write_summary(self, summary: dict[str, Any], out_dir: Path, name: str) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"{name}.json"
        self._dump(path, summary)
        return path

    @staticmethod
    def _dump(path: Path, document: dict[str, Any]) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(document, f, indent=2, default=_json_default)
            f.write("\n")

    def read(self, path: Path) -> pd.DataFrame:
        frame = pd.read_table(path, sep="\t", dtype={"feature_id": str})
        missing = [c for c in RESULT_COLUMNS if c not in frame.columns]
        if missing:
            raise InputDataError(f"results table {path} lacks columns {missing}", line=HEADER_LINE)
        return frame


def _json_default(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"cannot serialize {type(value).__name__}")


class FileSystemParamsRepository(ParamsRepository):
    """JSON storage of model parameters."""

    def save_fit(self, fit: EmFit, path: Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(fit.to_json() + "\n", encoding="utf-8")
        logger.info(f"Wrote fitted parameters to '{path}'")

    def load_params(self, path: Path) -> HmmParams:
        path = Path(path)
        if not path.is_file():
            raise InputDataError(f"parameter file not found: {path}")
        try:
            return HmmParams.from_json(path.read_text(encoding="utf-8"))
        except ValueError as e:
            if isinstance(e, InputDataError):
                raise
            raise InputDataError(f"invalid parameter file {path}: {e}") from e


class FileSystemReportRepository(ReportRepository):
    """Writes evaluation reports as CSV."""

    def write(self, report: EvalReport, out_dir: Path, suffix: str = "") -> list[Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        long_path = out_dir / f"eval_long{suffix}.csv"
        curves_path = out_dir / f"eval_curves{suffix}.csv"
        report.to_long_frame().to_csv(long_path, index=False, lineterminator="\n")
        report.to_curves_frame().to_csv(curves_path, index=False, lineterminator="\n")
        logger.info(f"Wrote evaluation report to '{long_path}' and '{curves_path}'")
        return [long_path, curves_path]
