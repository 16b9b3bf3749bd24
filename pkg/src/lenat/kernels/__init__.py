"""Edit-alignment kernel with compiled/pure selection at import.

The compiled extension is preferred when built; set LENAT_PURE_PYTHON=1 to
force the pure fallback (useful for benchmarking and debugging).
"""

import os

from . import pure

pure_edit_ops = pure.edit_ops

compiled_edit_ops = None
if os.environ.get("LENAT_PURE_PYTHON", "") != "1":
    try:
        from . import _ckernels

        compiled_edit_ops = _ckernels.edit_ops
    except ImportError:
        compiled_edit_ops = None

if compiled_edit_ops is not None:
    edit_ops = compiled_edit_ops
    IMPL = "compiled"
else:
    edit_ops = pure_edit_ops
    IMPL = "pure"
