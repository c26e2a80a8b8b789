import pytest

from jobkit import build_job


@pytest.fixture
def job_dir(tmp_path):
    return build_job(tmp_path / "job")
