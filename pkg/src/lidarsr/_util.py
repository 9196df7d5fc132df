"""Small internal helpers."""

import os
import tempfile


def atomic_write_bytes(path, data: bytes) -> None:
    """Write *data* to *path* via a same-directory temp file and rename.

    Either the complete file appears at *path* or nothing does; a failure
    mid-write never leaves a partial output behind.
    """
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=os.path.basename(path) + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))
