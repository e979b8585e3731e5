# -*- coding: utf-8 -*-
import os

import numpy as np
import pytest
import yaml

from src.core.exceptions import CheckpointFormatError, MissingInputError
from src.embedding.checkpoint import checkpoint_paths, load_model, read_vectors, save_model, write_vectors
from src.embedding.inference import term_distribution
from src.embedding.model import RLM, RPE
from tests.helpers import random_model


@pytest.mark.parametrize(
    "kind,output,bias",
    [(RLM, "hs", False), (RLM, "softmax", True), (RPE, "hs", False), (RPE, "hs", True)],
)
def test_round_trip_is_exact(tmp_path, kind, output, bias):
    model = random_model(kind, 12, 5, seed=4, output=output, bias=bias)
    prefix = str(tmp_path / "ckpt" / "model")
    written = save_model(model, prefix, losses=[2.0, 1.5])

    loaded = load_model(prefix)
    assert loaded.kind == model.kind and loaded.output == model.output
    assert loaded.terms == model.terms
    for name, value in model.parameters().items():
        np.testing.assert_array_equal(loaded.parameters()[name], value)
    for query in ([0, 3], [7], [1, 1, 11]):
        assert term_distribution(loaded, query, 5).entries == term_distribution(model, query, 5).entries
    assert os.path.exists(written["loss"])
    assert ("tree" in written) == (kind == RLM and output == "hs")
    assert ("bias" in written) == bias


def test_loss_file_lists_epochs(tmp_path):
    model = random_model(RPE, 4, 2, seed=1)
    written = save_model(model, str(tmp_path / "m"), losses=[3.0, 2.5])
    with open(written["loss"]) as f:
        assert f.read().splitlines() == ["epoch\tloss", "1\t3", "2\t2.5"]


def test_vector_file_layout(tmp_path):
    path = str(tmp_path / "v.vec")
    write_vectors(path, ["a", "b"], np.array([[1.0, 0.5], [0.0, -2.0]]))
    with open(path) as f:
        lines = f.read().splitlines()
    assert lines == ["2 2", "a 1 0.5", "b 0 -2"]
    labels, matrix = read_vectors(path)
    assert labels == ["a", "b"]
    np.testing.assert_array_equal(matrix, [[1.0, 0.5], [0.0, -2.0]])


def test_truncated_vector_file_names_the_line(tmp_path):
    model = random_model(RPE, 6, 3, seed=2)
    prefix = str(tmp_path / "m")
    paths = save_model(model, prefix)
    with open(paths["query"]) as f:
        lines = f.read().splitlines()
    lines[3] = " ".join(lines[3].split()[:-1])
    with open(paths["query"], "w") as f:
        f.write("\n".join(lines) + "\n")

    with pytest.raises(CheckpointFormatError) as err:
        load_model(prefix)
    assert err.value.line == 4
    assert err.value.path == paths["query"]


def test_missing_rows_are_rejected(tmp_path):
    path = str(tmp_path / "v.vec")
    with open(path, "w") as f:
        f.write("3 2\na 1 2\nb 3 4\n")
    with pytest.raises(CheckpointFormatError):
        read_vectors(path)


def test_dimension_mismatch_is_rejected(tmp_path):
    model = random_model(RPE, 5, 3, seed=3)
    prefix = str(tmp_path / "m")
    paths = save_model(model, prefix)
    write_vectors(paths["term"], model.terms, np.zeros((5, 4)))
    with pytest.raises(CheckpointFormatError):
        load_model(prefix)


def test_manifest_shape_mismatch_is_rejected(tmp_path):
    model = random_model(RLM, 5, 3, seed=3)
    prefix = str(tmp_path / "m")
    paths = save_model(model, prefix)
    with open(paths["manifest"]) as f:
        manifest = yaml.safe_load(f)
    manifest["dim"] = 7
    with open(paths["manifest"], "w") as f:
        yaml.safe_dump(manifest, f)
    with pytest.raises(CheckpointFormatError):
        load_model(prefix)


def test_missing_checkpoint(tmp_path):
    with pytest.raises(MissingInputError):
        load_model(str(tmp_path / "absent"))
    assert set(checkpoint_paths("x")) == {"manifest", "query", "term", "nodes", "tree", "bias"}
