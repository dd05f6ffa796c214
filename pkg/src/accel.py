"""Optional numba acceleration; plain Python when numba is unavailable"""
try:
    from numba import jit
    HAVE_NUMBA = True
except Exception:
    HAVE_NUMBA = False

    def jit(*args, **kwargs):
        def _decorator(func):
            func.py_func = func
            return func
        return _decorator
