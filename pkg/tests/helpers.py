"""Random admissible states and small fixtures shared by the tests."""
import numpy as np

from skewbc.equations import CeeModel, IeeModel, SweModel

ALL_FORMULATIONS = {
    "iee": ("standard", "sqrt_p"),
    "swe": ("u_form", "w_form"),
    "cee": ("contracted", "diagonal"),
}


def make_model(name, **kw):
    return {"iee": IeeModel, "swe": SweModel, "cee": CeeModel}[name](**kw)


def random_normal(rng):
    a = rng.uniform(0.0, 2.0 * np.pi)
    return np.array([np.cos(a), np.sin(a)])


def random_primitive(name, rng):
    if name == "iee":
        return np.array([rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(0.1, 5.0)])
    if name == "swe":
        return np.array([rng.uniform(0.2, 4.0), rng.uniform(-2, 2), rng.uniform(-2, 2)])
    return np.array([rng.uniform(0.2, 3.0), rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(0.2, 3.0)])


def random_state(model, rng, min_un=0.1):
    """State and unit normal with ``|u_n| >= min_un * |velocity|``."""
    while True:
        prim = random_primitive(model.name, rng)
        U = prim if model.name == "iee" else model.from_primitive(prim)
        n = random_normal(rng)
        vel = prim[:2] if model.name == "iee" else prim[1:3]
        if abs(vel @ n) >= min_un * max(np.hypot(*vel), 1e-3) and abs(vel @ n) > 1e-3:
            return U, n


def random_field(model, grid, rng, spread=0.3):
    """Nodal random admissible state of shape ``(n, M)``."""
    base = random_primitive(model.name, rng)
    prim = base[:, None] * (1.0 + spread * rng.uniform(-1, 1, (len(base), grid.M)))
    if model.name != "iee":
        # keep velocities from being all of one sign-scaled pattern
        prim[1:3] = base[1:3, None] + spread * rng.uniform(-1, 1, (2, grid.M))
        return model.from_primitive(prim)
    prim[:2] = base[:2, None] + spread * rng.uniform(-1, 1, (2, grid.M))
    return prim
