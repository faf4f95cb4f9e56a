import numpy as np
import pytest

from canyonpl.evaluation import PipelineInputs, prepare_inputs
from canyonpl.synth import GroundTruthPL, SceneConfig, generate_pl, generate_scene

SMALL = SceneConfig(n_streets=4, length_range=(60.0, 90.0), density_range=(0.1, 0.4),
                    links_range=(20, 30))


def with_targets(inputs: PipelineInputs, dataset) -> PipelineInputs:
    """Re-attach path loss from ``dataset`` to already-computed features."""
    from canyonpl.clutter import FeatureMatrix
    fm = inputs.clutter
    pl = {lk.link_id: lk.measured_pl for lk in dataset.links}
    return PipelineInputs(dataset, FeatureMatrix(fm.values, fm.columns, fm.link_ids, fm.street_ids,
                                                 [pl[i] for i in fm.link_ids]), inputs.height_maps)


def synthetic_inputs(config, seed, truth, with_buildings=False):
    ds, _ = generate_scene(config, seed)
    inputs = prepare_inputs(ds, with_buildings=with_buildings)
    ds = generate_pl(ds, inputs.clutter, truth, seed)
    return ds, with_targets(inputs, ds)


@pytest.fixture(scope="session")
def small_scene():
    return synthetic_inputs(SMALL, 3, GroundTruthPL(noise_sigma=1.0), with_buildings=True)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
