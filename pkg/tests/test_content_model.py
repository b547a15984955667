import json
import math

import httpx
import pytest

from registerdex.content_model import (AggregationError, ClassificationError,
                                       ContentModel, EmbeddingError,
                                       FixtureContentModel, ModelError,
                                       ModelTranscript, PaperDoc,
                                       RecordingContentModel, RemoteConfig,
                                       RemoteContentModel, ReplayContentModel,
                                       ReplayMissError, TranscriptRecorder,
                                       TransportCounter, aggregate_key,
                                       classify_key, extract_key,
                                       fixture_embedding, read_transcripts)
from registerdex.schema import NodePath, PaperType, SchemaNode

DOC = PaperDoc(id="d1", title="T", abstract="An abstract.", full_text="body")
LEAF = SchemaNode(name="Operation", description="ops")
LEAF_PATH = NodePath.parse("Abstract/Method/Implementation/Operation")


class CountingModel(ContentModel):
    """Backend that fails if any generative hook is reached."""

    def __init__(self):
        self.calls = 0

    def _classify_reply(self, doc):
        self.calls += 1
        return "Survey"

    def _extract_reply(self, doc, node, path):
        self.calls += 1
        return "content"

    def _aggregate_reply(self, children):
        self.calls += 1
        return "parent"

    def _embed(self, text):
        self.calls += 1
        return fixture_embedding(text, 8)


def test_classify_declared_type_passthrough_no_model_call():
    model = CountingModel()
    doc = PaperDoc(id="d", title="t", abstract="a", declared_type=PaperType.SURVEY)
    assert model.classify_paper_type(doc) == PaperType.SURVEY
    assert model.calls == 0


def test_classify_replay_transcript():
    key = classify_key(DOC)
    model = ReplayContentModel({key: ModelTranscript(key, "classify",
                                                     "Benchmark Construction")})
    assert model.classify_paper_type(DOC) == PaperType.BENCHMARK_CONSTRUCTION


@pytest.mark.parametrize("paper_type", list(PaperType))
@pytest.mark.parametrize("mangle", [
    lambda s: s.lower() + ".",
    lambda s: s.upper(),
    lambda s: " ".join(part for part in s.replace("I", "i").split()) + "!",
])
def test_classify_normalization_over_variants(paper_type, mangle):
    label = mangle(paper_type.value)
    key = classify_key(DOC)
    model = ReplayContentModel({key: ModelTranscript(key, "classify", label)})
    assert model.classify_paper_type(DOC) == paper_type


def test_classify_unparseable_defaults_with_warning(caplog):
    key = classify_key(DOC)
    model = ReplayContentModel({key: ModelTranscript(key, "classify", "who knows")})
    with caplog.at_level("WARNING"):
        assert model.classify_paper_type(DOC) == PaperType.ALGORITHM_INNOVATION
    assert any("unparseable" in r.message for r in caplog.records)


def test_classify_empty_abstract_rejected():
    with pytest.raises(ClassificationError):
        CountingModel().classify_paper_type(PaperDoc(id="d", title="t", abstract=" "))


def test_extract_replay_byte_identical_and_deterministic():
    key = extract_key(DOC, LEAF, LEAF_PATH)
    model = ReplayContentModel({key: ModelTranscript(key, "extract", "stored text")})
    first = model.extract_leaf_content(DOC, LEAF, LEAF_PATH)
    second = model.extract_leaf_content(DOC, LEAF, LEAF_PATH)
    assert first == second == "stored text"


def test_extract_missing_section_is_blank():
    model = FixtureContentModel()
    assert model.extract_leaf_content(DOC, LEAF, LEAF_PATH) == ""


def test_extract_truncates_long_reply(caplog):
    key = extract_key(DOC, LEAF, LEAF_PATH)
    model = ReplayContentModel({key: ModelTranscript(key, "extract", "x" * 9000)})
    with caplog.at_level("WARNING"):
        content = model.extract_leaf_content(DOC, LEAF, LEAF_PATH)
    assert len(content) == model.max_content_len


def test_extract_non_leaf_rejected():
    parent = SchemaNode(name="Operation", description="", children=(LEAF,))
    with pytest.raises(ModelError):
        CountingModel().extract_leaf_content(DOC, parent, LEAF_PATH)


def test_aggregate_all_blank_children_no_model_call():
    model = CountingModel()
    assert model.aggregate_contents([("A", ""), ("B", "  ")]) == ""
    assert model.calls == 0


def test_aggregate_replay():
    children = [("A", "alpha"), ("B", "beta")]
    key = aggregate_key(children)
    model = ReplayContentModel({key: ModelTranscript(key, "aggregate", "parent text")})
    assert model.aggregate_contents(children) == "parent text"


def test_aggregate_requires_children():
    with pytest.raises(AggregationError):
        CountingModel().aggregate_contents([])


def test_aggregation_length_diagnostic_over_fixture_corpus(golden_registers, schemas, capsys):
    # diagnostic, not an assertion: report how often an aggregated parent is
    # longer than its longest child
    total = 0
    violations = 0
    for register in golden_registers:
        schema = schemas[register.paper_type]
        for path, content in register.contents.items():
            node = schema.resolve(path)
            if node.is_leaf or not content:
                continue
            child_lens = [len(register.contents[path.child(c.name)])
                          for c in node.children]
            total += 1
            if child_lens and len(content) > max(child_lens):
                violations += 1
    assert total > 0
    rate = violations / total
    print(f"aggregation length-constraint violation rate: {rate:.3f} "
          f"({violations}/{total})")
    assert 0.0 <= rate <= 1.0


def test_embed_deterministic_shape_and_self_similarity():
    model = FixtureContentModel(dimension=64, seed=3)
    a = model.embed("hierarchical index tree")
    b = model.embed("hierarchical index tree")
    assert a == b
    assert a.dimension == 64
    dot = sum(x * y for x, y in zip(a.values, b.values))
    norm = math.sqrt(sum(x * x for x in a.values))
    assert abs(dot / (norm * norm) - 1.0) < 1e-9


def test_embed_blank_rejected():
    with pytest.raises(EmbeddingError):
        FixtureContentModel().embed("   ")


def test_replay_miss_is_an_error():
    model = ReplayContentModel({})
    with pytest.raises(ReplayMissError):
        model.classify_paper_type(DOC)


def test_record_then_replay_round_trip(tmp_path):
    store = tmp_path / "transcripts.jsonl"
    recording = RecordingContentModel(FixtureContentModel(),
                                      TranscriptRecorder(str(store)))
    doc = PaperDoc(id="p", title="t", abstract="a",
                   full_text="[paper-type: Survey]\n== path: A/B ==\nhello world\n")
    node = SchemaNode(name="B", description="")
    path = NodePath.parse("A/B")
    assert recording.classify_paper_type(doc) == PaperType.SURVEY
    extracted = recording.extract_leaf_content(doc, node, path)
    aggregated = recording.aggregate_contents([("B", extracted)])
    replay = ReplayContentModel(read_transcripts(str(store)))
    assert replay.classify_paper_type(doc) == PaperType.SURVEY
    assert replay.extract_leaf_content(doc, node, path) == extracted
    assert replay.aggregate_contents([("B", extracted)]) == aggregated


def _chat_response(content):
    return {"choices": [{"message": {"content": content}}]}


def test_remote_classify_counts_transport_and_retries():
    counter = TransportCounter()
    attempts = []

    def handler(request: httpx.Request) -> httpx.Response:
        attempts.append(1)
        if len(attempts) < 3:
            return httpx.Response(500)
        return httpx.Response(200, json=_chat_response("theory proof"))

    model = RemoteContentModel(
        RemoteConfig(llm_url="http://llm.test/v1/chat", retries=3, backoff_base=0.0),
        transport=httpx.MockTransport(handler), counter=counter)
    assert model.classify_paper_type(DOC) == PaperType.THEORY_PROOF
    assert counter.value == 3


def test_remote_failure_after_retries():
    counter = TransportCounter()
    model = RemoteContentModel(
        RemoteConfig(llm_url="http://llm.test/v1/chat", retries=2, backoff_base=0.0),
        transport=httpx.MockTransport(lambda r: httpx.Response(503)),
        counter=counter)
    with pytest.raises(ModelError, match="after 2 attempts"):
        model.classify_paper_type(DOC)
    assert counter.value == 2


def test_remote_embedding_dimension_checked():
    def handler(request):
        return httpx.Response(200, json={"data": [{"embedding": [0.1, 0.2, 0.3]}]})

    model = RemoteContentModel(
        RemoteConfig(emb_url="http://emb.test/v1/emb", embedding_dimension=4,
                     retries=1),
        transport=httpx.MockTransport(handler), counter=TransportCounter())
    with pytest.raises(EmbeddingError, match="dimension"):
        model.embed("text")


def test_transcript_store_format(tmp_path):
    store = tmp_path / "t.jsonl"
    TranscriptRecorder(str(store)).record("k1", "classify", "Survey")
    line = json.loads(store.read_text().strip())
    assert set(line) == {"request_key", "operation", "response"}
