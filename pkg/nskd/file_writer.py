"""
File Writer Module - Atomic Output Files

This module provides the output helpers used by the command line:
- Atomic text writes through a temporary file in the target directory
- CSV output of pandas tables with a fixed header and line ending
"""

import logging
import os
import tempfile
from pathlib import Path
from typing import Union

import pandas as pd

from .errors import NskdError

logger = logging.getLogger(__name__)


def write_file_atomic(file_path: Union[str, Path], content: str, encoding: str = 'utf-8') -> None:
    """
    Write to a file atomically using a temporary file and a rename.

    An interrupted write leaves either the old file or no file, never a
    truncated one.

    Args:
        file_path (str): Path to the output file
        content (str): Content to write
        encoding (str): File encoding (default: utf-8)

    Raises:
        NskdError: if the directory or the file cannot be written

    Example:
        write_file_atomic('region.csv', table_text)
    """
    directory = Path(file_path).parent
    temp_path = None
    try:
        directory.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile(mode='w', encoding=encoding, newline='',
                                         dir=directory, delete=False) as temp_file:
            temp_file.write(content)
            temp_path = temp_file.name
        os.replace(temp_path, file_path)
    except PermissionError as e:
        logger.error("Permission denied writing '%s'", file_path)
        _cleanup(temp_path)
        raise NskdError(f"permission denied writing '{file_path}'") from e
    except OSError as e:
        logger.error("Could not write '%s': %s", file_path, e)
        _cleanup(temp_path)
        raise NskdError(f"could not write '{file_path}': {e}") from e
    logger.info("Wrote %d characters to '%s'", len(content), file_path)


def _cleanup(temp_path) -> None:
    if temp_path and os.path.exists(temp_path):
        try:
            os.remove(temp_path)
        except OSError:
            pass


def table_to_csv(table: pd.DataFrame) -> str:
    """CSV text of a table: header row, no index, '\\n' line endings."""
    return table.to_csv(index=False, lineterminator='\n')


def write_csv_atomic(table: pd.DataFrame, file_path: Union[str, Path]) -> None:
    write_file_atomic(file_path, table_to_csv(table))
