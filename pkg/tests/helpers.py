"""Small builders shared by several test modules."""

import numpy as np

from krylov_distance.lattice import Field, shell_indices


def random_field(spec, radius, rng):
    """Gaussian values on the diamond of the given radius, zero outside."""
    f = Field(spec)
    for l in range(radius + 1):
        for p in shell_indices(spec, l):
            f.values[p] = rng.standard_normal()
    f.active_radius = radius
    return f
