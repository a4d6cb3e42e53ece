import os

import pytest

from oterma.model import Model, ModelParams
from oterma.pipeline import Pipeline, PipelineConfig, STAGES


@pytest.fixture(scope="session")
def model():
    return Model(ModelParams())


@pytest.fixture(scope="session")
def pipeline(tmp_path_factory):
    """One full verified pipeline per test session (several minutes)."""
    out = tmp_path_factory.mktemp("certs")
    cfg = PipelineConfig(out_dir=str(out))
    pipe = Pipeline(cfg)
    reports = pipe.run_all()
    status = {r.stage: r for r in reports}
    failed = [r.stage for r in reports if r.status != "verified"]
    if failed or len(reports) < len(STAGES):
        detail = "; ".join(f"{r.stage}: {r.status} {r.message}" for r in reports)
        pytest.fail(f"pipeline did not verify: {detail}")
    pipe._reports = status
    return pipe


@pytest.fixture(scope="session")
def family(pipeline):
    return pipeline._load("lyapunov")


@pytest.fixture(scope="session")
def manifold(pipeline):
    return pipeline._load("manifold")[0]


@pytest.fixture(scope="session")
def fiber(pipeline):
    return pipeline._load("manifold")[1]


@pytest.fixture(scope="session")
def homoclinic(pipeline):
    return pipeline._load("homoclinic")


@pytest.fixture(scope="session")
def lipschitz(pipeline):
    return pipeline._load("lipschitz")


@pytest.fixture(scope="session")
def diffusion_result(pipeline):
    return pipeline._load("diffusion")
