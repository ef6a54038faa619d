import json

import pytest

from mlm_fixture import (
    NEGATIVE_SENTENCES,
    NEGATIVE_WORDS,
    POSITIVE_SENTENCES,
    POSITIVE_WORDS,
    train_tiny_mlm,
)


@pytest.fixture(scope="session")
def model_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("tiny_mlm")
    train_tiny_mlm(out)
    return str(out)


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    (out / "reviews.txt").write_text(
        "\n".join(POSITIVE_SENTENCES + NEGATIVE_SENTENCES) + "\n"
    )
    (out / "sentiment.json").write_text(
        json.dumps({"positive": POSITIVE_WORDS, "negative": NEGATIVE_WORDS})
    )
    return out
