import numpy as np

from nsgalerkin.spectral import SpectralField


def single(torus, k, c):
    """Real field on the +-k pair with coefficient c at +k."""
    c = np.asarray(c, dtype=complex)
    return SpectralField(torus, [k, [-x for x in k]], [c, np.conj(c)])


ACCEPTANCE = []


def record(number, title, passed, detail):
    """Log one acceptance line; the terminal summary repeats them all."""
    line = f"{'PASS' if passed else 'FAIL'} criterion {number:2d} ({title}): {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return passed
