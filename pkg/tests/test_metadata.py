from __future__ import annotations

import json

import pytest

from chronoforge.errors import SchemaError
from chronoforge.metadata import emit_metadata, load_metadata, parse_metadata

from tests.conftest import GOLDENS_DIR, RETAIL_DIR


def test_retail_tiny_parses(retail_metadata):
    assert retail_metadata.entityset_name == "retail_tiny"
    assert len(retail_metadata.entities) == 4
    assert len(retail_metadata.relationships) == 3


def test_undeclared_relationship_entity_pointer():
    doc = json.loads((RETAIL_DIR / "metadata.json").read_text())
    doc["relationships"][0]["child_entity"] = "payments"
    with pytest.raises(SchemaError) as err:
        parse_metadata(json.dumps(doc))
    assert err.value.pointer == "/relationships/0/child_entity"


def test_unknown_semantic_type_pointer():
    doc = json.loads((RETAIL_DIR / "metadata.json").read_text())
    doc["entities"][0]["variables"][1]["semantic_type"] = "money"
    with pytest.raises(SchemaError) as err:
        parse_metadata(json.dumps(doc))
    assert err.value.pointer == "/entities/0/variables/1/semantic_type"


def test_relationship_parent_variable_must_be_index():
    doc = json.loads((RETAIL_DIR / "metadata.json").read_text())
    doc["relationships"][0]["parent_variable"] = "name"
    with pytest.raises(SchemaError) as err:
        parse_metadata(json.dumps(doc))
    assert "parent_variable" in err.value.pointer


def test_cycle_detection():
    text = json.dumps(
        {
            "entityset_name": "loop",
            "entities": [
                {
                    "name": "a",
                    "index": "aid",
                    "variables": [
                        {"name": "aid", "semantic_type": "index"},
                        {"name": "bid", "semantic_type": "id"},
                    ],
                },
                {
                    "name": "b",
                    "index": "bid",
                    "variables": [
                        {"name": "bid", "semantic_type": "index"},
                        {"name": "aid", "semantic_type": "id"},
                    ],
                },
            ],
            "relationships": [
                {"parent_entity": "a", "parent_variable": "aid", "child_entity": "b", "child_variable": "aid"},
                {"parent_entity": "b", "parent_variable": "bid", "child_entity": "a", "child_variable": "bid"},
            ],
        }
    )
    with pytest.raises(SchemaError) as err:
        parse_metadata(text)
    assert "cycle" in str(err.value)


def test_duplicate_entity_and_variable_names():
    base = json.loads((RETAIL_DIR / "metadata.json").read_text())
    doc = json.loads(json.dumps(base))
    doc["entities"].append(doc["entities"][0])
    with pytest.raises(SchemaError):
        parse_metadata(json.dumps(doc))
    doc = json.loads(json.dumps(base))
    doc["entities"][0]["variables"].append({"name": "name", "semantic_type": "text"})
    with pytest.raises(SchemaError):
        parse_metadata(json.dumps(doc))


def test_json_syntax_error():
    with pytest.raises(SchemaError):
        parse_metadata("{not json")


def test_parse_emit_identity(retail_metadata):
    text = emit_metadata(retail_metadata)
    again = parse_metadata(text)
    assert again == retail_metadata
    assert emit_metadata(again) == text  # emitter is deterministic


def test_unknown_top_level_keys_preserved():
    doc = json.loads((RETAIL_DIR / "metadata.json").read_text())
    doc["custom_statistics"] = {"rows": 9}
    parsed = parse_metadata(json.dumps(doc))
    assert parsed.extra == {"custom_statistics": {"rows": 9}}
    assert '"custom_statistics"' in emit_metadata(parsed)


def test_empty_entities_emitted_not_omitted():
    parsed = parse_metadata('{"entityset_name": "x", "entities": [], "relationships": []}')
    assert '"entities": []' in emit_metadata(parsed)


def test_golden_file(retail_metadata):
    golden = GOLDENS_DIR / "retail_tiny_metadata.json"
    assert emit_metadata(retail_metadata) == golden.read_text(encoding="utf-8")


def test_load_metadata_matches_parse(retail_metadata):
    assert load_metadata(RETAIL_DIR / "metadata.json") == retail_metadata
