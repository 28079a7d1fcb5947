#!/usr/bin/env python3
"""
CodeFoundry - File Output Module
Atomic writes (temp file in the target directory, then rename) for
artifacts, reports and audit logs.
"""

import logging
import os
import tempfile
from pathlib import Path
from typing import Iterable, Union

LOG = logging.getLogger("CodeFoundry.storage")


def atomic_write_text(path: Union[str, Path], content: str) -> Path:
    """Write content so readers never observe a partial file"""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{target.name}.", suffix=".tmp", dir=target.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(content)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp_name, target)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise
    LOG.debug(f"Wrote {target}")
    return target


def atomic_write_lines(path: Union[str, Path], lines: Iterable[str]) -> Path:
    return atomic_write_text(path, "".join(f"{line}\n" for line in lines))
