import json
import random
import re

import pytest

import helpers
from roomkit import scenegraph
from roomkit.backends import MockRule, MockScript, BackendClient, RetryPolicy, serve_mock
from roomkit.geometry import distance_matrix
from roomkit.scenevqa import (
    DUAL_TEMPLATES,
    NEGATIVE_IMAGE_PROMPTS,
    POSITIVE_IMAGE_PROMPT,
    SINGLE_TEMPLATES,
    TRIPLE_TEMPLATES,
    FilterRuleSet,
    MissingPromptScoreError,
    QARecord,
    TemplateBank,
    TooFewObjectsError,
    dataset_stats,
    default_bank,
    filter_scene_image,
    filter_vocabulary,
    format_meters,
    gen_distance_qa,
    gen_graph_cot,
    gen_graph_qa,
)

TOY_COT = (
    "The art frame is hanging on the wall. "
    "The bookshelf_0, desk, and chair are supported by the floor. "
    "On top of the desk, there are a mug, a toothbrush holder, and a notebook."
)


def matrix_for(labels, spacing=1.0):
    objects = [(label, (i * spacing, 0.0, 2.0)) for i, label in enumerate(labels)]
    return distance_matrix(objects)


class TestTemplateBank:
    def test_exactly_45_templates(self):
        bank = default_bank()
        assert len(bank) == 45
        assert len(bank.single) == 15
        assert len(bank.dual) == 15
        assert len(bank.triple) == 15

    def test_known_templates_present(self):
        assert "What's the distance from [A] to [B]?" in SINGLE_TEMPLATES
        assert (
            "Can you determine the distance from [A] to [B] and also from [C] to [D]?"
            in DUAL_TEMPLATES
        )
        assert (
            "Please measure how far [A] is from [B], how far [C] is from [D], and how far [E] is from [F]."
            in TRIPLE_TEMPLATES
        )

    def test_placeholder_balance_enforced(self):
        bad = ("Only [A] here.",) + SINGLE_TEMPLATES[1:]
        with pytest.raises(ValueError):
            TemplateBank(single=bad)

    def test_wrong_count_rejected(self):
        with pytest.raises(ValueError):
            TemplateBank(single=SINGLE_TEMPLATES[:14])

    def test_from_toml(self, tmp_path):
        doc = ["[templates]"]
        for name, templates in (
            ("single", SINGLE_TEMPLATES),
            ("dual", DUAL_TEMPLATES),
            ("triple", TRIPLE_TEMPLATES),
        ):
            doc.append(f"{name} = {json.dumps(list(templates))}")
        path = tmp_path / "bank.toml"
        path.write_text("\n".join(doc))
        assert len(TemplateBank.from_toml(path)) == 45


class TestFormatMeters:
    def test_one_decimal(self):
        assert format_meters(2.1) == "2.1m"
        assert format_meters(2.10000001) == "2.1m"

    def test_half_up(self):
        assert format_meters(1.25) == "1.3m"
        assert format_meters(1.15) == "1.2m"

    def test_integer_distance(self):
        assert format_meters(3.0) == "3.0m"


class TestGenDistanceQa:
    def test_single_answer_formatting(self):
        matrix = matrix_for(["desk", "chair"], spacing=2.10)
        records = gen_distance_qa(["desk", "chair"], matrix, counts=(1, 0, 0), seed=4)
        assert len(records) == 1
        assert records[0].answer == "2.1m"
        assert records[0].task == "distance"

    def test_deterministic_for_seed(self):
        labels = [f"obj{i}" for i in range(8)]
        matrix = matrix_for(labels)
        first = gen_distance_qa(labels, matrix, seed=42)
        second = gen_distance_qa(labels, matrix, seed=42)
        assert [r.to_json_line() for r in first] == [r.to_json_line() for r in second]

    def test_seed_changes_output(self):
        labels = [f"obj{i}" for i in range(8)]
        matrix = matrix_for(labels)
        a = gen_distance_qa(labels, matrix, seed=1)
        b = gen_distance_qa(labels, matrix, seed=2)
        assert [r.question for r in a] != [r.question for r in b]

    def test_triple_distances_match_matrix(self):
        labels = [f"obj{i}" for i in range(6)]
        matrix = matrix_for(labels, spacing=1.5)
        records = gen_distance_qa(labels, matrix, counts=(0, 0, 3), seed=9)
        for record in records:
            assert len(record.payload) == 3
            for entry in record.payload:
                a, b = entry["pair"]
                assert entry["meters"] == pytest.approx(matrix.get(a, b))
                assert format_meters(entry["meters"]) in record.answer

    def test_answers_in_question_order(self):
        labels = [f"obj{i}" for i in range(6)]
        matrix = matrix_for(labels, spacing=0.7)
        records = gen_distance_qa(labels, matrix, counts=(0, 2, 2), seed=3)
        for record in records:
            pairs = [entry["pair"] for entry in record.payload]
            positions = [record.question.find(a) for a, _ in pairs]
            assert positions == sorted(positions)
            assert record.answer == ", ".join(
                format_meters(entry["meters"]) for entry in record.payload
            )

    def test_answer_pattern(self):
        labels = [f"obj{i}" for i in range(8)]
        records = gen_distance_qa(labels, matrix_for(labels), seed=11)
        for record in records:
            assert re.fullmatch(r"(\d+\.\dm)(, \d+\.\dm)*", record.answer)

    def test_too_few_objects_for_dual(self):
        matrix = matrix_for(["a", "b"])
        with pytest.raises(TooFewObjectsError):
            gen_distance_qa(["a", "b"], matrix, counts=(0, 1, 0))

    def test_too_few_objects_for_triple(self):
        labels = ["a", "b", "c", "d"]
        with pytest.raises(TooFewObjectsError):
            gen_distance_qa(labels, matrix_for(labels), counts=(0, 0, 1))


class TestGenGraphCot:
    def test_toy_paragraph(self, toy_graph):
        assert gen_graph_cot(toy_graph) == TOY_COT

    def test_empty_graph_sentinel(self):
        assert gen_graph_cot(scenegraph.empty_graph()) == (
            "The room contains no annotated objects."
        )

    def test_every_edge_mentioned_once(self, seventeen_graph):
        text = gen_graph_cot(seventeen_graph)
        for triple in seventeen_graph.to_pairwise():
            assert triple.child in text

    def test_sentence_count_matches_groups(self):
        rng = random.Random(31)
        for _ in range(50):
            doc = helpers.random_graph_doc(rng)
            g = scenegraph.parse_graph(json.dumps(doc))
            groups = {(t.parent, t.relation) for t in g.to_pairwise()}
            if not groups:
                continue
            sentence_count = gen_graph_cot(g).count(". ") + 1
            assert sentence_count == len(groups)

    def test_contain_and_attach_phrasing(self, seventeen_graph):
        text = gen_graph_cot(seventeen_graph)
        assert "Inside the bookshelf, there are a books and a vase." in text
        assert "The ceiling lamp is attached to the ceiling." in text


class TestGenGraphQa:
    def test_question_embeds_labels(self, toy_graph):
        record = gen_graph_qa(toy_graph, "sha256:img")
        non_roots = sorted(toy_graph.nodes() - {"ceiling", "wall", "floor"})
        assert len(non_roots) == 7
        for label in non_roots:
            assert label in record.question

    def test_answer_round_trips_to_payload(self, toy_graph):
        record = gen_graph_qa(toy_graph, "sha256:img")
        block = scenegraph.extract_json_block(record.answer)
        assert block is not None
        assert scenegraph.parse_graph(block) == toy_graph
        assert scenegraph.parse_graph(record.payload) == toy_graph

    def test_answer_has_cot_then_json(self, toy_graph):
        record = gen_graph_qa(toy_graph, "sha256:img")
        cot, _, rest = record.answer.partition("\n\n")
        assert cot == TOY_COT
        assert rest == scenegraph.serialize_graph(toy_graph)

    def test_empty_graph_answer(self):
        record = gen_graph_qa(scenegraph.empty_graph(), "sha256:img")
        block = scenegraph.extract_json_block(record.answer)
        assert json.loads(block) == {"ceiling": {}, "wall": {}, "floor": {}}

    def test_seventeen_fixture_triples(self, seventeen_graph):
        record = gen_graph_qa(seventeen_graph, "sha256:img")
        block = scenegraph.extract_json_block(record.answer)
        assert len(scenegraph.parse_graph(block).to_pairwise()) == 14

    def test_random_graphs_round_trip(self):
        rng = random.Random(37)
        for _ in range(100):
            g = scenegraph.parse_graph(json.dumps(helpers.random_graph_doc(rng)))
            record = gen_graph_qa(g, "sha256:x")
            block = scenegraph.extract_json_block(record.answer)
            assert scenegraph.parse_graph(block) == g

    def test_cot_backend_rewording(self, toy_graph):
        script = MockScript([MockRule("cot", {"text": "A tidy office scene."})])
        with serve_mock(script) as server:
            with BackendClient(server.url, RetryPolicy(attempts=1, deadline=5)) as client:
                record = gen_graph_qa(toy_graph, "sha256:img", cot_client=client)
        assert record.answer.startswith("A tidy office scene.")
        block = scenegraph.extract_json_block(record.answer)
        assert scenegraph.parse_graph(block) == toy_graph

    def test_cot_rewording_with_json_is_discarded(self, toy_graph):
        script = MockScript([MockRule("cot", {"text": 'Bad idea: {"floor": {}}'})])
        with serve_mock(script) as server:
            with BackendClient(server.url, RetryPolicy(attempts=1, deadline=5)) as client:
                record = gen_graph_qa(toy_graph, "sha256:img", cot_client=client)
        assert record.answer.startswith(TOY_COT)
        block = scenegraph.extract_json_block(record.answer)
        assert scenegraph.parse_graph(block) == toy_graph

    def test_record_id_stable(self, toy_graph):
        a = gen_graph_qa(toy_graph, "sha256:img")
        b = gen_graph_qa(toy_graph, "sha256:img")
        assert a.id == b.id


class TestImageFilter:
    def scores(self, positive, **overrides):
        scores = {POSITIVE_IMAGE_PROMPT: positive}
        for i, prompt in enumerate(NEGATIVE_IMAGE_PROMPTS):
            scores[prompt] = overrides.get(prompt, 0.1 + 0.01 * i)
        return scores

    def test_positive_wins(self):
        keep, reason = filter_scene_image(self.scores(0.9))
        assert keep and reason is None

    def test_sketch_wins(self):
        keep, reason = filter_scene_image(self.scores(0.4, **{"A sketch.": 0.95}))
        assert not keep
        assert reason == "A sketch."

    def test_tie_drops(self):
        scores = self.scores(0.5)
        scores["A cartoon."] = 0.5
        keep, reason = filter_scene_image(scores)
        assert not keep
        assert reason == "A cartoon."

    def test_missing_prompt_score(self):
        scores = self.scores(0.9)
        del scores["A painting."]
        with pytest.raises(MissingPromptScoreError):
            filter_scene_image(scores)

    def test_prompt_lists(self):
        assert POSITIVE_IMAGE_PROMPT == "An iphone photo of an indoor scene."
        assert len(NEGATIVE_IMAGE_PROMPTS) == 8
        assert "A piece of text." in NEGATIVE_IMAGE_PROMPTS


class TestVocabularyFilter:
    def test_spec_trio(self):
        kept, dropped = filter_vocabulary(["mug", "adult", "paneling"])
        assert kept == ["mug"]
        assert [label for label, _ in dropped] == ["adult", "paneling"]
        reasons = dict(dropped)
        assert "human term" in reasons["adult"]
        assert "structure term" in reasons["paneling"]

    def test_empty_input(self):
        assert filter_vocabulary([]) == ([], [])

    def test_ordinary_labels_survive(self):
        labels = [
            "mug", "red sofa", "office chair", "coffee table", "table lamp",
            "flower vase", "ceramic bowl", "wooden bookshelf", "alarm clock",
            "laptop", "potted plant", "picture frame", "floor lamp",
            "area rug carpet", "desk organizer", "water bottle", "fruit bowl",
            "reading pillow", "window curtain", "wicker basket",
        ]
        kept, dropped = filter_vocabulary(labels)
        assert kept == labels
        assert dropped == []

    def test_root_names_drop_on_exact_match_only(self):
        kept, dropped = filter_vocabulary(["wall", "floor", "floor lamp", "wall clock"])
        assert kept == ["floor lamp", "wall clock"]
        assert [label for label, _ in dropped] == ["wall", "floor"]

    def test_garbled_dropped(self):
        kept, dropped = filter_vocabulary(["x#$%@!", "mug"])
        assert kept == ["mug"]
        assert dropped[0][1] == "garbled text"

    def test_non_english_dropped(self):
        kept, dropped = filter_vocabulary(["桌子", "mug"])
        assert kept == ["mug"]
        assert dropped[0][1] == "non-English characters"

    def test_outdoor_and_non_entity(self):
        kept, dropped = filter_vocabulary(["mountain", "window view", "mug"])
        assert kept == ["mug"]
        reasons = dict(dropped)
        assert "outdoor term" in reasons["mountain"]
        assert "non-entity term" in reasons["window view"]

    def test_idempotent(self):
        labels = ["mug", "adult", "paneling", "mountain", "sofa", "x@#$1"]
        kept, _ = filter_vocabulary(labels)
        again, dropped = filter_vocabulary(kept)
        assert again == kept
        assert dropped == []

    def test_custom_rules_from_toml(self, tmp_path):
        path = tmp_path / "rules.toml"
        path.write_text(
            "[filters]\n"
            'structure_terms = ["grout"]\n'
            "english_only = false\n"
        )
        rules = FilterRuleSet.from_toml(path)
        kept, dropped = filter_vocabulary(["grout", "桌子", "adult"], rules)
        assert kept == ["桌子"]
        assert [label for label, _ in dropped] == ["grout", "adult"]


class TestDatasetStats:
    def test_counts_per_task(self, toy_graph):
        records = [gen_graph_qa(toy_graph, "sha256:a")] * 3 + [
            QARecord("d1", "", "distance", "q", "1.0m", [{"pair": ["a", "b"], "meters": 1.0}])
        ] * 5
        stats = dataset_stats(records)
        assert stats["totals"]["graph"] == 3
        assert stats["totals"]["distance"] == 5

    def test_mean_objects_per_graph(self, toy_graph):
        stats = dataset_stats([gen_graph_qa(toy_graph, "sha256:a")])
        assert stats["mean_objects_per_graph"] == 7

    def test_distinct_labels_deduplicated(self, toy_graph):
        records = [
            gen_graph_qa(toy_graph, "sha256:a"),
            gen_graph_qa(toy_graph, "sha256:b"),
        ]
        stats = dataset_stats(records)
        assert stats["distinct_labels"] == 7

    def test_per_source_and_split(self, toy_graph):
        base = gen_graph_qa(toy_graph, "sha256:a")
        records = [
            QARecord(**{**base.__dict__, "id": "g1", "source": "places"}),
            QARecord(**{**base.__dict__, "id": "g2", "source": "places", "split": "test"}),
        ]
        stats = dataset_stats(records)
        assert stats["per_source"]["places"] == {"graph": 1, "distance": 0, "test": 1}

    def test_jsonl_round_trip(self, toy_graph):
        record = gen_graph_qa(toy_graph, "sha256:a")
        again = QARecord.from_json_line(record.to_json_line())
        assert again == record
