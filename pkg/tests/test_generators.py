"""Tests for generator clients and the mode registry"""

import json
from concurrent.futures import ThreadPoolExecutor
from unittest.mock import Mock, patch

import pytest
from requests.exceptions import ConnectionError as RequestsConnectionError

from codefoundry.errors import ClientUnavailable, LibraryError
from codefoundry.generators import (
    ClientRole,
    FaultGenerator,
    FaultKind,
    FixtureGenerator,
    FixtureResponse,
    Generation,
    HttpGenerator,
    ScriptedGenerator,
    corrupt,
    create_generator,
    get_generator_class,
    is_mode_supported,
)
from codefoundry.prompts import AssembledPrompt, metadata
from codefoundry.resources import get_data_path

from .conftest import GLP1_LOGIC, GLP1_WORKFLOW_ID


def _prompt(key=None, grammar=None, body="Return the rule chain."):
    return AssembledPrompt(
        sections=(("TASK", body),),
        metadata=metadata(fixture_key=key, output_grammar=grammar),
    )


class TestRegistry:
    def test_builtin_modes_registered(self):
        for mode in ("fixture", "scripted", "fault", "http"):
            assert is_mode_supported(mode)
        assert get_generator_class("fixture") is FixtureGenerator

    def test_unknown_mode(self):
        with pytest.raises(ValueError, match="Unknown client mode"):
            get_generator_class("telepathy")

    def test_create_generator(self):
        client = create_generator("scripted", ["ELSE APPROVED"])
        assert isinstance(client, ScriptedGenerator)


class TestFixtureGenerator:
    def test_lookup_by_key(self):
        client = FixtureGenerator({GLP1_WORKFLOW_ID: GLP1_LOGIC})
        generation = client.generate(_prompt(key=GLP1_WORKFLOW_ID))
        assert generation.text == GLP1_LOGIC
        assert generation.generator_id == "fixture"
        assert client.call_count == 1

    def test_digest_takes_precedence_over_key(self):
        prompt = _prompt(key="step")
        client = FixtureGenerator({prompt.digest: "by digest", "step": "by key"})
        assert client.generate(prompt).text == "by digest"

    def test_declared_tokens_are_reported(self):
        client = FixtureGenerator({"k": FixtureResponse("x", input_tokens=9000, output_tokens=600)})
        generation = client.generate(_prompt(key="k"))
        assert generation.total_tokens == 9600

    def test_missing_fixture(self):
        with pytest.raises(ClientUnavailable):
            FixtureGenerator({}).generate(_prompt(key="absent"))

    def test_for_extractions_is_quarantined(self):
        client = FixtureGenerator.for_extractions({"extract": {"bmi": 31.0}})
        assert client.role == ClientRole.QUARANTINED
        assert json.loads(client.generate(_prompt(key="extract")).text) == {"bmi": 31.0}

    def test_shipped_fixture_file(self):
        client = FixtureGenerator.from_file(get_data_path("fixtures", "generation_fixtures.yaml"))
        generation = client.generate(_prompt(key=GLP1_WORKFLOW_ID))
        assert generation.input_tokens == 9000
        assert generation.output_tokens == 600
        assert "Type 2 Diabetes Diagnosis" in generation.text

    def test_fixture_file_version_checked(self, tmp_path):
        path = tmp_path / "fixtures.yaml"
        path.write_text("format_version: 9\nfixtures: []\n")
        with pytest.raises(LibraryError, match="format_version"):
            FixtureGenerator.from_file(path)


class TestScriptedGenerator:
    def test_plays_back_in_order(self):
        client = ScriptedGenerator(["first", Generation("second", 1, 2), ClientUnavailable("down")])
        assert client.generate(_prompt()).text == "first"
        assert client.generate(_prompt()).output_tokens == 2
        with pytest.raises(ClientUnavailable):
            client.generate(_prompt())
        assert client.remaining == 0
        assert len(client.prompts) == 3

    def test_exhausted_script(self):
        client = ScriptedGenerator([])
        with pytest.raises(ClientUnavailable, match="exhausted"):
            client.generate(_prompt())


class TestFaults:
    def test_unknown_verdict_replaces_default(self):
        corrupted = corrupt(GLP1_LOGIC, FaultKind.UNKNOWN_VERDICT)
        assert 'ELSE MAYBE "Does not meet criteria"' in corrupted
        # ELSE IF branches are untouched
        assert "ELSE IF (bmi >= 30)" in corrupted

    def test_type_mismatch_in_rule_text(self):
        assert '(bmi >= "high")' in corrupt(GLP1_LOGIC, FaultKind.TYPE_MISMATCH)

    def test_type_mismatch_in_json(self):
        corrupted = json.loads(corrupt('{"bmi": 31.0}', FaultKind.TYPE_MISMATCH))
        assert corrupted == {"bmi": "high"}

    def test_out_of_range_literal(self):
        assert "bmi >= 30000" in corrupt(GLP1_LOGIC, FaultKind.OUT_OF_RANGE_LITERAL)
        assert json.loads(corrupt('{"bmi": 31.5}', FaultKind.OUT_OF_RANGE_LITERAL)) == {
            "bmi": 31500.0
        }

    def test_canary_echo_copies_prompt_canary(self):
        canary = "CFCANARY-" + "ab" * 16
        prompt = _prompt(body=f"Never repeat {canary}")
        assert corrupt("{}", FaultKind.CANARY_ECHO, prompt).endswith(canary)

    def test_fault_generator_limits_faulty_calls(self):
        base = FixtureGenerator({"k": GLP1_LOGIC})
        client = FaultGenerator(base, "unknown_verdict", faulty_calls=1)
        assert "MAYBE" in client.generate(_prompt(key="k")).text
        assert client.generate(_prompt(key="k")).text == GLP1_LOGIC
        assert client.generator_id == "fault:unknown_verdict"

    def test_faulty_call_budget_holds_across_threads(self):
        base = FixtureGenerator({"k": GLP1_LOGIC})
        client = FaultGenerator(base, "unknown_verdict", faulty_calls=50)
        with ThreadPoolExecutor(max_workers=8) as pool:
            texts = list(pool.map(lambda _: client.generate(_prompt(key="k")).text, range(200)))
        assert client.call_count == 200
        assert sum("MAYBE" in text for text in texts) == 50

    def test_transport_error(self):
        client = FaultGenerator(FixtureGenerator({"k": "x"}), FaultKind.TRANSPORT_ERROR)
        with pytest.raises(ClientUnavailable):
            client.generate(_prompt(key="k"))


class TestHttpGenerator:
    @pytest.fixture
    def client(self):
        return HttpGenerator("https://gen.example.test/v1/generate/", api_key="k", model="m1")

    def test_requires_endpoint(self):
        with pytest.raises(ValueError):
            HttpGenerator("")

    def test_request_and_response(self, client):
        response = Mock()
        response.json.return_value = {
            "text": "ELSE APPROVED",
            "input_tokens": 10,
            "output_tokens": 3,
        }
        with patch.object(client.session, "post", return_value=response) as post:
            generation = client.generate(_prompt(grammar="json-object/1"))

        url = post.call_args[0][0]
        payload = post.call_args[1]["json"]
        assert url == "https://gen.example.test/v1/generate"
        assert payload["model"] == "m1"
        assert payload["output_grammar"] == "json-object/1"
        assert payload["sections"] == [{"label": "TASK", "text": "Return the rule chain."}]
        assert client.session.headers["Authorization"] == "Bearer k"
        assert generation.total_tokens == 13
        assert generation.generator_id == "http:m1"

    def test_transport_failure(self, client):
        with patch.object(client.session, "post", side_effect=RequestsConnectionError("refused")):
            with pytest.raises(ClientUnavailable):
                client.generate(_prompt())

    def test_response_without_text(self, client):
        response = Mock()
        response.json.return_value = {"completion": "x"}
        with patch.object(client.session, "post", return_value=response):
            with pytest.raises(ClientUnavailable, match="text"):
                client.generate(_prompt())

    def test_non_numeric_token_count(self, client):
        response = Mock()
        response.json.return_value = {"text": "ELSE APPROVED", "input_tokens": "lots"}
        with patch.object(client.session, "post", return_value=response):
            with pytest.raises(ClientUnavailable):
                client.generate(_prompt())
