"""Experiment grid runner and CSV emission.

The default grid carries the two classical LPC baselines plus the 27
training-regime rows (algorithm x performance x epochs x selection x
validation), each evaluated at every quantizer depth over a corpus.

CSV schema (version 1): row_label, n_bits, segsnr_db, std_db, file,
frames, seed, config_hash. Per-file rows are followed by an aggregate
row with file=ALL whose statistics pool all frames of the corpus; the
final line embeds a sha256 checksum of all data lines. Wall-clock time
is kept out of the CSV (it lives in the cell cache) so reruns with the
same seed are byte-identical.
"""

import hashlib
import json
import re
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import codec
from .codec import CodecConfig
from .dsp import DEFAULT_FRAME_LEN, Signal
from .errors import NladpcmError
from .training import TrainConfig

CSV_SCHEMA_VERSION = 1
BUILD_ID = "nladpcm-0.1.0"

CSV_COLUMNS = ("row_label", "n_bits", "segsnr_db", "std_db", "file", "frames", "seed", "config_hash")

DEFAULT_N_BITS = (2, 3, 4, 5)


@dataclass(frozen=True)
class GridRow:
    """One table row: a predictor plus (for networks) its training regime."""

    label: str
    predictor: str
    lpc_order: int = 10
    train: TrainConfig = None

    def codec_config(self, n_bits: int, seed: int, frame_len: int = DEFAULT_FRAME_LEN) -> CodecConfig:
        if self.predictor == "lpc":
            return CodecConfig(
                n_bits=n_bits, frame_len=frame_len, predictor="lpc",
                lpc_order=self.lpc_order, rng_seed=seed,
            )
        return CodecConfig(
            n_bits=n_bits, frame_len=frame_len, predictor="mlp",
            train=self.train, rng_seed=seed,
        )


def _mlp_row(algorithm: str, performance: str, epochs: int, selection: str,
             validation: bool) -> GridRow:
    names = {"best_train": "", "committee_mean": "Cmean", "committee_median": "Cmedian"}
    tokens = ["L-M" if algorithm == "lm" else "B-R"]
    if validation:
        tokens.append("V")
    if names[selection]:
        tokens.append(names[selection])
    tokens += [performance, str(epochs)]
    cfg = TrainConfig(
        algorithm=algorithm, performance=performance, epochs=epochs,
        selection=selection, validation=validation,
    )
    return GridRow(label=" ".join(tokens), predictor="mlp", train=cfg)


def table1_rows():
    """Classical linear baselines: same order (10) and same coefficient count (25)."""
    return [
        GridRow(label="LPC-10", predictor="lpc", lpc_order=10),
        GridRow(label="LPC-25", predictor="lpc", lpc_order=25),
    ]


def table2_rows():
    """The 27 training-regime rows in table order."""
    selections = ("best_train", "committee_mean", "committee_median")
    rows = []
    for performance, epochs in (("mse", 6), ("mse", 50), ("msereg", 6), ("msereg", 50)):
        for sel in selections:
            rows.append(_mlp_row("lm", performance, epochs, sel, validation=False))
    for epochs in (6, 50):
        for sel in selections:
            rows.append(_mlp_row("br", "msereg", epochs, sel, validation=False))
    for performance in ("mse", "msereg"):
        for sel in selections:
            rows.append(_mlp_row("lm", performance, 50, sel, validation=True))
    for sel in selections:
        rows.append(_mlp_row("br", "msereg", 50, sel, validation=True))
    return rows


def default_grid_rows():
    return table2_rows() + table1_rows()


@dataclass
class ExperimentGrid:
    corpus: list                      # (name, Signal) pairs
    rows: list = field(default_factory=default_grid_rows)
    n_bits_values: tuple = DEFAULT_N_BITS
    seed: int = 0
    frame_len: int = DEFAULT_FRAME_LEN


@dataclass(frozen=True)
class CellResult:
    segsnr_db: float
    std_db: float
    frames: int
    config_hash: str
    error: str = ""


def _sanitize(token: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", token)


def _cell_path(cells_dir: Path, label: str, n_bits: int, file_name: str) -> Path:
    return cells_dir / f"{_sanitize(label)}__nq{n_bits}__{_sanitize(file_name)}.json"


def run_cell(row: GridRow, n_bits: int, signal: Signal, seed: int,
             frame_len: int = DEFAULT_FRAME_LEN) -> CellResult:
    """Encode one (row, n_bits, signal) cell and report its statistics."""
    cfg = row.codec_config(n_bits, seed, frame_len)
    try:
        result = codec.encode(signal, cfg)
    except NladpcmError as exc:
        return CellResult(
            segsnr_db=float("nan"), std_db=float("nan"), frames=0,
            config_hash=cfg.config_text_hash(), error=f"{type(exc).__name__}: {exc}",
        )
    report = result.report
    return CellResult(
        segsnr_db=report.segsnr_db, std_db=report.std_db,
        frames=report.frames_counted, config_hash=cfg.config_text_hash(),
    )


def _pool_cells(cells):
    """Aggregate per-file (mean, std, frames) into corpus-level statistics
    by pooling frames: the same numbers a single concatenated run would give."""
    total = sum(c.frames for c in cells)
    if total == 0:
        return float("nan"), float("nan"), 0
    mean = sum(c.frames * c.segsnr_db for c in cells) / total
    second_moment = sum(c.frames * (c.std_db ** 2 + c.segsnr_db ** 2) for c in cells) / total
    var = max(second_moment - mean ** 2, 0.0)
    return mean, float(np.sqrt(var)), total


def run_grid(grid: ExperimentGrid, out_path=None, cells_dir=None) -> str:
    """Execute every cell, reusing any cached cells, and emit the CSV.

    Rerunning with the same seed yields a byte-identical CSV; a partially
    complete cell cache is completed rather than recomputed.
    """
    if cells_dir is None and out_path is not None:
        cells_dir = Path(str(out_path) + ".cells")
    if cells_dir is not None:
        cells_dir = Path(cells_dir)
        cells_dir.mkdir(parents=True, exist_ok=True)

    lines = [
        f"# nladpcm grid results schema={CSV_SCHEMA_VERSION}",
        f"# build={BUILD_ID}",
        f"# seed={grid.seed}",
        ",".join(CSV_COLUMNS),
    ]
    data_lines = []

    for row in grid.rows:
        for n_bits in grid.n_bits_values:
            per_file = []
            config_hash = row.codec_config(n_bits, grid.seed, grid.frame_len).config_text_hash()
            for name, signal in grid.corpus:
                cell = None
                cache_file = _cell_path(cells_dir, row.label, n_bits, name) if cells_dir else None
                if cache_file is not None and cache_file.exists():
                    cached = json.loads(cache_file.read_text())
                    if cached.get("seed") == grid.seed and cached.get("config_hash") == config_hash:
                        cell = CellResult(
                            segsnr_db=cached["segsnr_db"], std_db=cached["std_db"],
                            frames=cached["frames"], config_hash=cached["config_hash"],
                            error=cached.get("error", ""),
                        )
                if cell is None:
                    started = time.perf_counter()
                    cell = run_cell(row, n_bits, signal, grid.seed, grid.frame_len)
                    if cache_file is not None:
                        cache_file.write_text(json.dumps({
                            "segsnr_db": cell.segsnr_db, "std_db": cell.std_db,
                            "frames": cell.frames, "config_hash": cell.config_hash,
                            "error": cell.error, "seed": grid.seed,
                            "wall_clock_s": time.perf_counter() - started,
                        }))
                per_file.append((name, cell))
                data_lines.append(",".join([
                    row.label, str(n_bits), repr(cell.segsnr_db), repr(cell.std_db),
                    name, str(cell.frames), str(grid.seed), cell.config_hash,
                ]))
            ok_cells = [c for _, c in per_file if not c.error]
            mean, std, frames = _pool_cells(ok_cells)
            data_lines.append(",".join([
                row.label, str(n_bits), repr(mean), repr(std),
                "ALL", str(frames), str(grid.seed), config_hash,
            ]))

    checksum = hashlib.sha256("\n".join(data_lines).encode()).hexdigest()
    csv_text = "\n".join(lines + data_lines + [f"# sha256={checksum}", ""])
    if out_path is not None:
        Path(out_path).write_text(csv_text)
    return csv_text


def parse_grid_csv(csv_text: str):
    """Data rows of a grid CSV as a list of dicts (checksum verified)."""
    data_lines = []
    rows = []
    for line in csv_text.splitlines():
        if line.startswith("# sha256="):
            expected = line.split("=", 1)[1]
            actual = hashlib.sha256("\n".join(data_lines).encode()).hexdigest()
            if expected != actual:
                raise NladpcmError("grid CSV checksum mismatch")
            continue
        if not line or line.startswith("#") or line.startswith("row_label,"):
            continue
        data_lines.append(line)
        parts = line.split(",")
        rows.append({
            "row_label": parts[0], "n_bits": int(parts[1]),
            "segsnr_db": float(parts[2]), "std_db": float(parts[3]),
            "file": parts[4], "frames": int(parts[5]),
            "seed": int(parts[6]), "config_hash": parts[7],
        })
    return rows


def gamma_sweep(signal: Signal, gammas=None, epochs_values=(6, 50), n_bits: int = 2,
                seed: int = 0, frame_len: int = DEFAULT_FRAME_LEN, out_path=None) -> str:
    """SEGSNR as a function of the performance ratio, for each epoch count.

    Every point is one LM + regularized-error encode; gamma = 1 is exactly
    the plain mean-squared-error run.
    """
    if gammas is None:
        gammas = [i / 10 for i in range(11)]
    lines = [
        f"# nladpcm gamma sweep schema={CSV_SCHEMA_VERSION}",
        f"# build={BUILD_ID}",
        f"# seed={seed}",
        "gamma,epochs,n_bits,segsnr_db,std_db,frames,seed,config_hash",
    ]
    data_lines = []
    for epochs in epochs_values:
        for gamma in gammas:
            train = TrainConfig(algorithm="lm", performance="msereg", gamma=float(gamma),
                                epochs=epochs)
            cfg = CodecConfig(n_bits=n_bits, frame_len=frame_len, predictor="mlp",
                              train=train, rng_seed=seed)
            result = codec.encode(signal, cfg)
            data_lines.append(",".join([
                repr(float(gamma)), str(epochs), str(n_bits),
                repr(result.report.segsnr_db), repr(result.report.std_db),
                str(result.report.frames_counted), str(seed), cfg.config_text_hash(),
            ]))
    checksum = hashlib.sha256("\n".join(data_lines).encode()).hexdigest()
    csv_text = "\n".join(lines + data_lines + [f"# sha256={checksum}", ""])
    if out_path is not None:
        Path(out_path).write_text(csv_text)
    return csv_text
