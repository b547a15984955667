import pathlib

import pytest

from registerdex.content_model import ReplayContentModel, load_corpus
from registerdex.index_tree import IndexKind, build_index_tree
from registerdex.register_builder import build_corpus_registers, read_register_store
from registerdex.schema import PaperType, default_schemas

DATA = pathlib.Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir() -> pathlib.Path:
    return DATA


@pytest.fixture(scope="session")
def schemas():
    return default_schemas()


@pytest.fixture(scope="session")
def algo_schema(schemas):
    return schemas[PaperType.ALGORITHM_INNOVATION]


@pytest.fixture(scope="session")
def fixture_corpus():
    return load_corpus(str(DATA / "corpus_20.jsonl"))


@pytest.fixture(scope="session")
def replay_model():
    return ReplayContentModel.from_file(str(DATA / "transcripts_20.jsonl"),
                                        dimension=32, seed=7)


@pytest.fixture(scope="session")
def golden_registers():
    return read_register_store(str(DATA / "golden_registers.jsonl"))


@pytest.fixture(scope="session")
def fixture_registers(fixture_corpus, schemas, replay_model):
    registers, report = build_corpus_registers(fixture_corpus, schemas, replay_model)
    assert not report.failed
    return registers


@pytest.fixture(scope="session")
def fixture_tree(fixture_registers):
    return build_index_tree(fixture_registers, IndexKind.LEXICAL)
