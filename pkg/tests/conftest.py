import numpy as np
import pytest

from conservolast import (EnergyModel, FitConfig, Kernel, SamplingGrid, TileSpec,
                          generate_training_data, greedy_fit, make_tile,
                          recompute_stress_offset)


def random_model(rng, n_centers=5, family="multiquadric", radius=None,
                 center_scale=0.4, coeff_scale=1.0):
    """A generic random conservative model with zeroed-out stress origin."""
    radius = radius if radius is not None else float(rng.uniform(0.5, 1.5))
    centers = rng.normal(0.0, center_scale, (n_centers, 3))
    gradc = rng.normal(0.0, coeff_scale, (n_centers, 3))
    hessc = rng.normal(0.0, coeff_scale, (n_centers, 3, 3))
    hessc = 0.5 * (hessc + hessc.transpose(0, 2, 1))
    k_off = rng.normal(0.0, coeff_scale, (3, 3))
    k_off = 0.5 * (k_off + k_off.T)
    m = EnergyModel(Kernel(family, radius), centers, gradc, hessc,
                    np.zeros(3), k_off)
    return recompute_stress_offset(m)


@pytest.fixture(scope="session")
def solid_tile():
    return make_tile(TileSpec("solid", target_elements=128))


@pytest.fixture(scope="session")
def hole_tile():
    return make_tile(TileSpec("circular_hole", target_elements=512, hole_radius=0.3))


@pytest.fixture(scope="session")
def hole_dataset(hole_tile):
    """Full 12x12 protocol dataset on the circular-hole tile."""
    samples, records, log = generate_training_data(hole_tile, SamplingGrid())
    return samples, records, log


@pytest.fixture(scope="session")
def hole_fit(hole_dataset):
    samples, _, _ = hole_dataset
    model, report = greedy_fit(samples, FitConfig(kmeans_seed=0))
    return model, report
