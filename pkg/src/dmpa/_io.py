"""Atomic file writes: a temp file in the target directory, then ``os.replace``."""
import os
import tempfile


def atomic_write_text(path, text: str) -> None:
    path = os.fspath(path)
    if not path:
        raise FileNotFoundError("empty output path")
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def fmt_num(x) -> str:
    """CSV literal for a number; non-finite floats render as ``inf``/``-inf``/``nan``."""
    if isinstance(x, float):
        return repr(x)
    return str(x)
