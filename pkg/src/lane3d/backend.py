"""Kernel backend selection.

Hot numeric kernels ship in two flavours: numba-jitted loops and a pure
numpy fallback. The active backend is chosen once from the environment
(``LANE3D_BACKEND=numba|numpy``) and can be switched at runtime, which the
tests and the kernel benchmark rely on.

``LANE3D_DETERMINISTIC=1`` pins numba to a single thread. The kernels are
written so each output element is owned by one thread, so results are
reproducible for a fixed backend either way; the env var exists to also fix
thread scheduling and timing jitter.
"""

import os

_VALID = ("numba", "numpy")
_backend = None


def _detect_default() -> str:
    want = os.environ.get("LANE3D_BACKEND", "").strip().lower()
    if want:
        if want not in _VALID:
            raise ValueError(f"LANE3D_BACKEND must be one of {_VALID}, got {want!r}")
        if want == "numba" and not _numba_available():
            raise RuntimeError("LANE3D_BACKEND=numba but numba is not importable")
        return want
    return "numba" if _numba_available() else "numpy"


def _numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except Exception:
        return False
    return True


def active_backend() -> str:
    global _backend
    if _backend is None:
        _backend = _detect_default()
        if deterministic() and _backend == "numba":
            import numba

            numba.set_num_threads(1)
    return _backend


def set_backend(name: str) -> None:
    global _backend
    if name not in _VALID:
        raise ValueError(f"backend must be one of {_VALID}, got {name!r}")
    if name == "numba" and not _numba_available():
        raise RuntimeError("numba backend requested but numba is not importable")
    _backend = name


def deterministic() -> bool:
    return os.environ.get("LANE3D_DETERMINISTIC", "") not in ("", "0", "false")
