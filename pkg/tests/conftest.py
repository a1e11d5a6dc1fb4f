import numpy as np
import pytest


@pytest.fixture(scope="session")
def warm_kernels():
    """Compile the numba kernels on tiny inputs so wall-clock budgets in the
    acceptance tests measure the algorithms, not JIT compilation."""
    from ksdisc.eigen import eigen_spectrum
    from ksdisc.initial_conditions import builtin_ic
    from ksdisc.integrate import flow_map, integrate
    from ksdisc.models import ModelSpec
    from ksdisc.systems import Geometry, make_system

    spec = ModelSpec.centered(2, alpha=1.0)
    geo = Geometry.odd(4)
    state = builtin_ic("random(0, 0.01)", geo)
    integrate(state, spec, 1e-4, 0.001, record_every=5)
    system = make_system(spec, geo)
    flow_map(system, np.zeros((3, geo.dof)), 1.0, 0.001, 10)
    eigen_spectrum(np.diag([1.0, -2.0, 3.0]))
    return True
