"""Ingestion, field selection, document assembly, and bundled data files."""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iotintel.chunking import ChunkingStrategy
from iotintel.corpus import (
    ContentElement,
    DatasetDescriptor,
    FieldSelection,
    FieldSelectionError,
    RawRecord,
    RoleProfile,
    TabularParseError,
    build_documents,
    builtin_descriptors,
    builtin_roles,
    default_field_selection,
    get_descriptor,
    get_role,
    parse_element_stream,
    parse_tabular_dataset,
    render_field_selection_prompt,
    select_fields,
    summarize_elements,
)
from iotintel.corpus.types import MetadataValueError, coerce_metadata_value
from iotintel.llmgateway import SequenceProvider


def make_descriptor(dataset_id="variot_vulnerabilities", **overrides):
    defaults = dict(
        dataset_id=dataset_id,
        display_name="Test dataset",
        description="records for tests",
        field_selection=FieldSelection(
            page_content_fields=("title", "description"),
            metadata_fields=("id", "products")),
        chunking=ChunkingStrategy("Character", 500, 100),
    )
    defaults.update(overrides)
    return DatasetDescriptor(**defaults)


class TestMetadataValues:
    def test_accepted_shapes(self):
        assert coerce_metadata_value("x") == "x"
        assert coerce_metadata_value(["a", "b"]) == ["a", "b"]
        assert coerce_metadata_value(3.5) == 3.5
        assert coerce_metadata_value(True) is True
        assert coerce_metadata_value(None) is None

    def test_rejected_shapes(self):
        with pytest.raises(MetadataValueError):
            coerce_metadata_value(float("inf"))
        with pytest.raises(MetadataValueError):
            coerce_metadata_value([1, 2])
        with pytest.raises(MetadataValueError):
            coerce_metadata_value(object())


class TestParseTabular:
    def test_variot_shaped_object(self):
        payload = json.dumps([{
            "id": "VAR-1",
            "title": "Camera RCE",
            "description": "Remote code execution in the web interface.",
            "products": ["DLink DCS-942"],
        }]).encode()
        records = parse_tabular_dataset(payload, make_descriptor())
        assert len(records) == 1
        record = records[0]
        assert record.record_id == "VAR-1"
        assert record.dataset_id == "variot_vulnerabilities"
        assert record.fields["products"] == ["DLink DCS-942"]

    def test_empty_array(self):
        assert parse_tabular_dataset(b"[]", make_descriptor()) == []

    def test_ndjson_order_preserved(self):
        lines = b'\n'.join(
            json.dumps({"id": f"r{i}", "title": f"t{i}"}).encode()
            for i in range(3))
        records = parse_tabular_dataset(lines, make_descriptor())
        assert [r.record_id for r in records] == ["r0", "r1", "r2"]

    def test_nested_objects_flattened_with_dots(self):
        payload = json.dumps([{
            "id": "VAR-2",
            "vulns": {"configurations": "cpe:/a:vendor:product"},
        }]).encode()
        record = parse_tabular_dataset(payload, make_descriptor())[0]
        assert record.fields["vulns.configurations"] == "cpe:/a:vendor:product"
        assert "vulns" not in record.fields

    def test_malformed_json_reports_byte_offset(self):
        with pytest.raises(TabularParseError) as err:
            parse_tabular_dataset(b'[{"id": "x", }]', make_descriptor())
        assert err.value.byte_offset > 0

    def test_malformed_ndjson_line(self):
        data = b'{"id": "a"}\n{"id": broken}\n'
        with pytest.raises(TabularParseError) as err:
            parse_tabular_dataset(data, make_descriptor())
        assert err.value.byte_offset >= len(b'{"id": "a"}\n')

    def test_missing_record_id_skipped_with_warning(self):
        payload = json.dumps([
            {"id": "keep", "title": "a"},
            {"title": "no id here"},
        ]).encode()
        warnings = []
        records = parse_tabular_dataset(payload, make_descriptor(), warnings)
        assert [r.record_id for r in records] == ["keep"]
        assert any("skipped 1 record" in w for w in warnings)

    def test_numeric_record_id_stringified(self):
        records = parse_tabular_dataset(b'[{"id": 17}]', make_descriptor())
        assert records[0].record_id == "17"

    def test_invalid_utf8(self):
        with pytest.raises(TabularParseError):
            parse_tabular_dataset(b'[{"id": "\xff\xfe"}]', make_descriptor())


class TestElementStream:
    def test_single_text_element(self):
        data = json.dumps({"kind": "text", "payload": "Mirai targets cameras"}).encode()
        elements = parse_element_stream(data)
        assert elements == [ContentElement("text", "Mirai targets cameras")]

    def test_mixed_stream_order_preserved(self):
        objs = [
            {"kind": "text", "payload": "intro"},
            {"kind": "table", "payload": "a,b\n1,2"},
            {"kind": "code", "payload": "print('x')"},
            {"kind": "text", "payload": "outro"},
        ]
        data = "\n".join(json.dumps(o) for o in objs).encode()
        elements = parse_element_stream(data)
        assert [e.kind for e in elements] == ["text", "table", "code", "text"]
        assert len(elements) == 4

    def test_unknown_kind_rejected(self):
        data = json.dumps({"kind": "video", "payload": "x"}).encode()
        with pytest.raises(ValueError, match="unknown element kind"):
            parse_element_stream(data)


class TestSummarizeElements:
    def test_all_text_concatenation(self):
        elements = [ContentElement("text", "one"), ContentElement("text", "two")]
        assert summarize_elements(elements) == "one\n\ntwo"

    def test_scripted_table_converter(self):
        elements = [ContentElement("text", "before"),
                    ContentElement("table", "a,b")]
        out = summarize_elements(elements, {"table": lambda payload: "TABLE-SUMMARY"})
        assert out == "before\n\nTABLE-SUMMARY"

    def test_missing_converter_lists_kinds(self):
        elements = [ContentElement("figure", "aGk="), ContentElement("code", "x=1")]
        with pytest.raises(ValueError) as err:
            summarize_elements(elements, {"code": lambda p: p})
        assert "figure" in str(err.value)

    def test_output_at_least_as_long_as_text_payloads(self):
        elements = [ContentElement("text", "abc"), ContentElement("text", "defgh"),
                    ContentElement("table", "t")]
        out = summarize_elements(elements, {"table": lambda p: "summary"})
        assert len(out) >= len("abc") + len("defgh")


TABLE_DEFAULTS = {
    "variot_vulnerabilities": (("title", "description"), ("id", "products")),
    "variot_exploits": (("title", "description", "exploit"), ("id", "products")),
    "mitre_attack_ics": (("name", "description"), ("stixId",)),
    "threat_reports": (("content",), ("title",)),
}


class TestDefaultFieldSelection:
    @pytest.mark.parametrize("dataset_id", sorted(TABLE_DEFAULTS))
    def test_built_in_defaults(self, dataset_id):
        content, metadata = TABLE_DEFAULTS[dataset_id]
        names = list(content) + list(metadata) + ["extra1", "extra2"]
        selection = default_field_selection(dataset_id, names)
        assert selection.page_content_fields == content
        assert selection.metadata_fields == metadata
        assert selection.unused_fields == ("extra1", "extra2")

    def test_cls_is_all_metadata(self):
        names = ["id", "product", "manufacturer", "level"]
        selection = default_field_selection("cls", names)
        assert selection.page_content_fields == ()
        assert selection.metadata_fields == tuple(names)

    def test_unknown_dataset_rejected(self):
        with pytest.raises(FieldSelectionError):
            default_field_selection("mystery", ["a"])


VARIOT_VULN_FIELDS = ["cve", "id", "credit", "description", "title", "products",
                      "vulns.-config.", "cvss-score", "cvss-string", "reference",
                      "published", "modified"]


def variot_samples():
    return [RawRecord("variot_vulnerabilities", f"VAR-{i}",
                      {name: f"v{i}" for name in VARIOT_VULN_FIELDS})
            for i in range(3)]


class TestSelectFields:
    def test_no_llm_uses_defaults(self):
        selection = select_fields(VARIOT_VULN_FIELDS, variot_samples())
        assert selection.page_content_fields == ("title", "description")
        assert selection.metadata_fields == ("id", "products")

    def test_scripted_llm_recorded_column(self):
        # one recorded model's split for the VARIoT vulnerability fields
        reply = json.dumps({
            "page_content": ["credit", "description", "title"],
            "metadata": ["id", "products", "vulns.-config."],
            "unused": ["cve", "cvss-score", "cvss-string", "reference",
                       "published", "modified"],
        })
        selection = select_fields(VARIOT_VULN_FIELDS, variot_samples(),
                                  SequenceProvider([reply]))
        assert selection.page_content_fields == ("credit", "description", "title")
        assert set(selection.metadata_fields) == {"id", "products", "vulns.-config."}
        assert set(selection.unused_fields) == {"cve", "cvss-score", "cvss-string",
                                                "reference", "published", "modified"}

    def test_unknown_field_ignored_with_warning(self):
        reply = json.dumps({"page_content": ["title", "zzz"],
                            "metadata": ["id"], "unused": []})
        warnings = []
        selection = select_fields(["title", "id"], variot_samples(),
                                  SequenceProvider([reply]), warnings)
        assert selection.page_content_fields == ("title",)
        assert any("zzz" in w for w in warnings)

    def test_duplicate_assignment_prefers_page_content(self):
        reply = json.dumps({"page_content": ["title"],
                            "metadata": ["title", "id"], "unused": []})
        selection = select_fields(["title", "id"], variot_samples(),
                                  SequenceProvider([reply]))
        assert selection.page_content_fields == ("title",)
        assert selection.metadata_fields == ("id",)

    def test_unmentioned_field_lands_in_unused(self):
        reply = json.dumps({"page_content": ["title"], "metadata": [], "unused": []})
        selection = select_fields(["title", "forgotten"], variot_samples(),
                                  SequenceProvider([reply]))
        assert "forgotten" in selection.unused_fields

    def test_unparseable_falls_back_to_defaults(self):
        warnings = []
        selection = select_fields(VARIOT_VULN_FIELDS, variot_samples(),
                                  SequenceProvider(["not json at all"]), warnings)
        assert selection.page_content_fields == ("title", "description")
        assert warnings

    def test_unparseable_without_defaults_is_error(self):
        samples = [RawRecord("mystery", "1", {"a": "x"})]
        with pytest.raises(FieldSelectionError):
            select_fields(["a"], samples, SequenceProvider(["garbage"]))

    def test_empty_samples_rejected(self):
        with pytest.raises(ValueError):
            select_fields(["a"], [])

    def test_prompt_embeds_fields_and_samples(self):
        prompt = render_field_selection_prompt(["title", "id"], variot_samples())
        assert "title" in prompt and "id" in prompt
        assert "VAR-0" not in prompt  # record ids are not fields
        assert prompt.count("v0") >= 1

    @given(st.lists(st.sampled_from(["a", "b", "c", "d", "e"]), min_size=1,
                    max_size=5, unique=True))
    @settings(max_examples=50)
    def test_output_partitions_input(self, names):
        groups = {"page_content": names[:1], "metadata": names[1:2],
                  "unused": names[2:]}
        selection = select_fields(names, variot_samples(),
                                  SequenceProvider([json.dumps(groups)]))
        combined = (list(selection.page_content_fields)
                    + list(selection.metadata_fields)
                    + list(selection.unused_fields))
        assert sorted(combined) == sorted(names)


class TestBuildDocuments:
    def test_variot_example(self):
        record = RawRecord("variot_vulnerabilities", "VAR-1", {
            "title": "T", "description": "D", "id": "VAR-1", "products": ["P"]})
        docs = build_documents([record], make_descriptor())
        assert docs[0].page_content == "T\n\nD"
        assert docs[0].metadata == {"id": "VAR-1", "products": ["P"]}
        assert docs[0].doc_id == "variot_vulnerabilities/VAR-1"

    def test_metadata_only_dataset(self):
        descriptor = make_descriptor(
            dataset_id="cls",
            field_selection=FieldSelection(
                page_content_fields=(),
                metadata_fields=("id", "product", "level")),
            retrieval_mode="metadata_only")
        record = RawRecord("cls", "1", {"id": "1", "product": "Cam", "level": 2})
        docs = build_documents([record], descriptor)
        assert docs[0].page_content == ""
        assert docs[0].metadata == {"id": "1", "product": "Cam", "level": 2}

    def test_missing_content_field_warns(self):
        record = RawRecord("variot_vulnerabilities", "VAR-1",
                           {"title": "T", "id": "VAR-1"})
        warnings = []
        docs = build_documents([record], make_descriptor(), warnings)
        assert docs[0].page_content == "T"
        assert any("description" in w for w in warnings)

    def test_list_values_joined_in_content(self):
        descriptor = make_descriptor(field_selection=FieldSelection(
            page_content_fields=("products",), metadata_fields=("id",)))
        record = RawRecord("variot_vulnerabilities", "r", {
            "id": "r", "products": ["A", "B"]})
        docs = build_documents([record], descriptor)
        assert docs[0].page_content == "A; B"

    def test_deterministic_over_identical_input(self):
        payload = json.dumps([{"id": "a", "title": "x", "description": "y"}]).encode()
        docs1 = build_documents(parse_tabular_dataset(payload, make_descriptor()),
                                make_descriptor())
        docs2 = build_documents(parse_tabular_dataset(payload, make_descriptor()),
                                make_descriptor())
        assert docs1 == docs2

    @given(st.dictionaries(st.sampled_from(["title", "description", "id",
                                            "products", "other"]),
                           st.text(min_size=1, max_size=10), min_size=1))
    @settings(max_examples=50)
    def test_metadata_keys_subset_of_selection(self, fields):
        fields.setdefault("id", "rid")
        record = RawRecord("variot_vulnerabilities", "rid", fields)
        docs = build_documents([record], make_descriptor())
        assert set(docs[0].metadata) <= {"id", "products"}


class TestBundledData:
    def test_descriptor_ids_and_modes(self):
        descriptors = builtin_descriptors()
        assert set(descriptors) == {"variot_vulnerabilities", "variot_exploits",
                                    "mitre_attack_ics", "threat_reports", "cls"}
        assert descriptors["cls"].retrieval_mode == "metadata_only"
        assert descriptors["threat_reports"].metadata_field_infos == ()

    def test_descriptor_chunking_matches_defaults(self):
        expected = {
            "variot_vulnerabilities": ChunkingStrategy("RecursiveCharacter", 500, 100),
            "variot_exploits": ChunkingStrategy("TokenText", 1000, 150),
            "mitre_attack_ics": ChunkingStrategy("Character", 1000, 200),
            "threat_reports": ChunkingStrategy("TokenText", 500, 200),
        }
        descriptors = builtin_descriptors()
        for dataset_id, chunking in expected.items():
            assert descriptors[dataset_id].chunking == chunking

    def test_descriptor_field_selection_matches_defaults(self):
        descriptors = builtin_descriptors()
        for dataset_id, (content, metadata) in TABLE_DEFAULTS.items():
            selection = descriptors[dataset_id].field_selection
            assert selection.page_content_fields == content
            assert selection.metadata_fields == metadata

    def test_roles_complete_with_backgrounds(self):
        roles = builtin_roles()
        assert set(roles) == {"Consumer", "SecurityAnalyst", "TechnicalOfficer",
                              "Developer", "Trainer"}
        for profile in roles.values():
            assert profile.background.knowledge
            assert profile.background.goals
            assert profile.background.requirements
            assert len(profile.actions) == 3
            assert profile.example_queries

    def test_consumer_background_phrases(self):
        consumer = get_role("Consumer")
        assert "practical, easy to follow" in consumer.background.requirements

    def test_get_descriptor_unknown(self):
        with pytest.raises(KeyError):
            get_descriptor("nope")

    def test_role_round_trip(self):
        profile = get_role("Trainer")
        assert RoleProfile.from_dict(profile.to_dict()) == profile


class TestTypeValidation:
    def test_field_selection_disjoint(self):
        with pytest.raises(ValueError):
            FieldSelection(page_content_fields=("a",), metadata_fields=("a",))

    def test_descriptor_mode_consistency(self):
        with pytest.raises(ValueError):
            make_descriptor(retrieval_mode="metadata_only")

    def test_descriptor_infos_must_be_metadata_fields(self):
        from iotintel.corpus import MetadataFieldInfo
        with pytest.raises(ValueError):
            make_descriptor(metadata_field_infos=(
                MetadataFieldInfo("nonexistent", "d", "string"),))

    def test_descriptor_round_trip(self):
        descriptor = get_descriptor("variot_vulnerabilities")
        assert DatasetDescriptor.from_dict(descriptor.to_dict()) == descriptor
