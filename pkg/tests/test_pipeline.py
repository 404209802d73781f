import numpy as np
import pytest

from armload.dataset import synth_fixture
from armload.errors import InvalidInputError
from armload.evaluation import canonical_json
from armload.imaging import write_image
from armload.pipeline import PipelineConfig, parallel_map, run_pipeline


def write_fixture(root, kind, classes=3, per_class=6, seed=0, size=96):
    images, labels = synth_fixture(classes, per_class, kind, seed=seed, size=size)
    for i, (img, label) in enumerate(zip(images, labels)):
        (root / label).mkdir(parents=True, exist_ok=True)
        write_image(root / label / f"{i:03d}.png", img)
    return root


def _square(x):
    return x * x


class TestParallelMap:
    def test_order_preserved(self):
        assert parallel_map(_square, range(7), jobs=2) == [x * x for x in range(7)]


class TestConfig:
    def test_unknown_method(self):
        with pytest.raises(InvalidInputError):
            PipelineConfig(method="sift")


@pytest.fixture(scope="module")
def texture(tmp_path_factory):
    return write_fixture(tmp_path_factory.mktemp("texture"), "texture")


class TestRunPipeline:
    @pytest.mark.parametrize("method", ["lbp", "hc", "mc"])
    def test_report_shape(self, texture, method):
        report, model = run_pipeline(texture, PipelineConfig(method=method, seed=1))
        assert report["split"] == {"train": 12, "test": 6, "test_indices": report["split"]["test_indices"]}
        assert sum(map(sum, report["confusion_matrix"])) == 6
        assert report["config"]["seed"] == 1 and report["config"]["method"] == method
        assert model.dim == {"lbp": 531, "hc": 225, "mc": 31}[method]

    def test_bkp_codebook_from_training_split(self, tmp_path):
        root = write_fixture(tmp_path, "blob", per_class=4, size=128)
        report, model = run_pipeline(root, PipelineConfig(method="bkp", seed=2, vocabulary=20))
        book = model.extras["codebook"]
        assert book["k"] == 20 and model.dim == 20
        assert report["split"]["train"] == 8

    def test_deterministic_and_job_independent(self, texture):
        cfg = PipelineConfig(method="lbp", seed=4)
        a = canonical_json(run_pipeline(texture, cfg, jobs=1)[0])
        b = canonical_json(run_pipeline(texture, cfg, jobs=2)[0])
        assert a == b
