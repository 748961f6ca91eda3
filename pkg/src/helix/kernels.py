"""Hot-kernel dispatch: the compiled ``_core`` extension when built, else ``_fallback``.

Set ``HELIX_PURE_PYTHON=1`` to force the fallback (used by the benchmark and
by the parity tests).
"""

from __future__ import annotations

import os

from helix import _fallback

if os.environ.get("HELIX_PURE_PYTHON", "") not in ("", "0"):
    _impl = _fallback
else:
    try:
        from helix import _core as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _fallback

BACKEND = "cython" if _impl is not _fallback else "python"

edit_distance = _impl.edit_distance
longest_match = _impl.longest_match
ctc_log_prob = _impl.ctc_log_prob
bitplane_mvm = _impl.bitplane_mvm
NO_SHIFT_LIMIT = _fallback.NO_SHIFT_LIMIT
