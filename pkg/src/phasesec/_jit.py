"""Optional numba acceleration.

Numerical kernels are written as plain scalar-loop Python so the same
source runs interpreted when numba is unavailable. `kernel` compiles a
function with nopython mode and an on-disk cache; `compile_closure` is
for functions that take other jitted functions as arguments, where the
numba cache does not apply.

fastmath stays off everywhere: bit-reproducible results across runs and
process counts matter more than the last factor of two.
"""

try:
    from numba import njit as _njit

    HAVE_NUMBA = True

    def kernel(func):
        return _njit(cache=True, fastmath=False)(func)

    def compile_closure(func):
        return _njit(cache=False, fastmath=False)(func)

except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def kernel(func):
        return func

    def compile_closure(func):
        return func
