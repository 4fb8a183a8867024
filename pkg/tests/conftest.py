import numpy as np
import pytest
from scipy.constants import epsilon_0
from scipy.special import ellipk

from qsurfloss import (
    CrossSection,
    Strip,
    bundled_device_table,
    group_for_fit,
    interdigital_unit_cell,
    solve_cross_section,
)


def cps_capacitance(width_um: float, gap_um: float, eps_sub_rel: float) -> float:
    """Conformal-mapping capacitance of two coplanar strips, F/m.

    Independent analytic oracle: strips of equal width w separated by gap s
    on a dielectric half-space map to ``C = eps0 (1+eps_r)/2 K(k')/K(k)``
    with modulus k = s/(s + 2w) (half-gap over outer half-width).
    """
    k = gap_um / (gap_um + 2.0 * width_um)
    kp = np.sqrt(1.0 - k * k)
    return epsilon_0 * 0.5 * (1.0 + eps_sub_rel) * ellipk(kp**2) / ellipk(k**2)


@pytest.fixture(scope="session")
def two_strip_geom() -> CrossSection:
    """10 um strips with a 10 um gap at +/-0.5 V on sapphire."""
    return CrossSection(
        [Strip(0.0, 10.0, +0.5), Strip(20.0, 10.0, -0.5)],
        eps_sub_rel=10.15,
        discretization=256,
    )


@pytest.fixture(scope="session")
def two_strip_sol(two_strip_geom):
    return solve_cross_section(two_strip_geom)


@pytest.fixture(scope="session")
def interdigital_sol_1um():
    return solve_cross_section(interdigital_unit_cell(1.0, 7, discretization=256))


@pytest.fixture(scope="session")
def records():
    return bundled_device_table()


@pytest.fixture(scope="session")
def grouped_points(records):
    points = group_for_fit(records, mode="per_die_design")
    points.sort(key=lambda p: (p.p_sm, p.p_j, p.group_id))
    return points
