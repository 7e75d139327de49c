"""Seeded random numbers and generic phase-point sampling.

The generator is xorshift64* (Vigna 2016): state update ``x ^= x >> 12;
x ^= x << 25; x ^= x >> 27`` and output ``x * 0x2545F4914F6CDD1D mod 2**64``.
Floats take the top 53 bits, so streams are identical on every platform.
"""

import numpy as np

from .errors import SovChainError
from .poisson import RATIONAL, coord_index, site_size

_MASK = (1 << 64) - 1
_MULT = 0x2545F4914F6CDD1D


class XorShift64Star:
    def __init__(self, seed=0):
        # splitmix64 scramble so small seeds give well-mixed, non-zero states
        z = (int(seed) + 0x9E3779B97F4A7C15) & _MASK
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        z ^= z >> 31
        self.state = z or 0x9E3779B97F4A7C15

    def next_u64(self):
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & _MASK
        x ^= x >> 27
        self.state = x
        return (x * _MULT) & _MASK

    def random(self):
        """Uniform float in [0, 1)."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo=-1.0, hi=1.0):
        return lo + (hi - lo) * self.random()

    def complex_square(self, half=1.0):
        """Uniform in the square [-half, half] x [-half, half] of the plane."""
        re = self.uniform(-half, half)
        im = self.uniform(-half, half)
        return complex(re, im)

    def complex_vector(self, n, half=1.0):
        return np.array([self.complex_square(half) for _ in range(n)], dtype=np.complex128)

    def choice_index(self, n):
        return int(self.random() * n)

    def spawn(self):
        """Independent child generator seeded from this stream."""
        return XorShift64Star(self.next_u64())


def make_rng(seed_or_rng):
    if isinstance(seed_or_rng, XorShift64Star):
        return seed_or_rng
    return XorShift64Star(0 if seed_or_rng is None else seed_or_rng)


def reduce_point(spec, coords):
    """Project onto the reduced strata used by the N=2 reconstruction.

    rational: traceless sites (S22 = -S11); trigonometric: S02 = S01, S22 = -S11.
    """
    x = np.array(coords, dtype=np.complex128)
    for k in range(spec.N):
        if spec.model == RATIONAL:
            x[coord_index(spec.model, k, "S22")] = -x[coord_index(spec.model, k, "S11")]
        else:
            x[coord_index(spec.model, k, "S02")] = x[coord_index(spec.model, k, "S01")]
            x[coord_index(spec.model, k, "S22")] = -x[coord_index(spec.model, k, "S11")]
    return x


def generic_guard(spec, coords, convention="nonstandard", guard=1e-8, sep_rtol=1e-3,
                  pole_dist=1e-3):
    """None if ``coords`` is a generic point for separation, else a reason string."""
    # imported here because sov and model sit above this module
    from .model import lax_numerator
    from .sov import separate, separating_pair_numerators

    num = lax_numerator(spec, coords)
    a_num, _ = separating_pair_numerators(spec, num, convention)
    if abs(a_num[-1]) < guard or abs(a_num[0]) < guard:
        return "separating polynomial loses degree"
    try:
        sp = separate(spec, coords, convention)
    except SovChainError as exc:
        return type(exc).__name__
    x = sp.x
    scale = max(1.0, float(np.max(np.abs(x))))
    if len(x) > 1:
        d = np.abs(x[:, None] - x[None, :])
        if d[~np.eye(len(x), dtype=bool)].min() < sep_rtol * scale:
            return "clustered roots"
    if min(abs(xi - v) for xi in x for v in spec.nu) < pole_dist:
        return "root near pole"
    if spec.model != RATIONAL and np.min(np.abs(x)) < pole_dist:
        return "root near zero"
    if np.min(np.abs(sp.p)) < guard:
        return "vanishing momentum"
    return None


def random_phase_point(spec, rng, reduced=False, convention="nonstandard", half=1.0,
                       max_tries=1000, require_generic=True):
    """Coordinates uniform in the complex square, rejected until generic."""
    rng = make_rng(rng)
    for _ in range(max_tries):
        x = rng.complex_vector(spec.N * site_size(spec.model), half)
        if reduced:
            x = reduce_point(spec, x)
        if not require_generic or generic_guard(spec, x, convention) is None:
            return x
    raise RuntimeError("could not sample a generic phase point")
