from pathlib import Path
from typing import Union

import pandas as pd
from loguru import logger

from ouqsd import __version__

FLOAT_FORMAT = "%.17g"


def header_comment(seed: int) -> str:
    return f"# ouqsd {__version__} seed={seed}\n"


def write_csv(frame: pd.DataFrame, path: Union[str, Path], seed: int) -> Path:
    """Write a table with the provenance comment line, bit-stable reals"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        handle.write(header_comment(seed))
        frame.to_csv(handle, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info(f"Wrote {len(frame)} rows to {path}")
    return path
