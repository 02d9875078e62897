# ------------------------------------------------------------------
# Content Fingerprints
# ------------------------------------------------------------------

import hashlib
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from elastoscope.core.field_base import FieldBase


def field_fingerprint(obj: "FieldBase") -> str:
    """
    Compute a SHA-256 hash identifying a field by grid geometry and values.
    Two fields with the same fingerprint are bit-identical.
    """
    h = hashlib.sha256()
    h.update(type(obj).__name__.encode())
    h.update(repr((obj.grid.cells, obj.grid.extents, obj.grid.origin)).encode())
    h.update(obj.values.tobytes())
    return h.hexdigest()
