import dataclasses

import numpy as np
import pytest

from veil.attack import AttackConfig, augment, obfuscate
from veil.candidates import EmbeddingTable, SynonymConfig
from veil.errors import VeilError
from veil.text import Document

from conftest import build_hand_model


class TestObfuscate:
    def test_fixture_flip_single_step(self, attack_model, ugly_doc, plain_embeddings):
        # Brute-force check below: of all candidate substitutions at any
        # target, only ugly->plain flips the prediction to 'a'.
        cfg = AttackConfig(mode="targeted", generators=("synonym",),
                           embeddings=plain_embeddings)
        result = obfuscate(attack_model, ugly_doc, "b", cfg)
        assert result.success is True
        assert len(result.steps) == 1
        step = result.steps[0]
        assert (step.old, step.new) == ("ugly", "plain")
        assert result.adv_doc.tokens == ("you", "are", "plain")
        assert result.change_count == 1
        # o-gap before was 2.0 vs 0.5; after substitution o_b = 0 < o_a = 0.5
        assert attack_model.predict(result.adv_doc) == "a"

    def test_brute_force_oracle_over_candidates(self, attack_model, ugly_doc,
                                                plain_embeddings):
        # Independent enumeration: try every table word at every position
        # and confirm 'plain'@2 is the only single substitution that flips.
        flips = []
        for i in range(3):
            for word in plain_embeddings.vectors:
                tokens = list(ugly_doc.tokens)
                tokens[i] = word
                doc = Document(id="t", tokens=tuple(tokens), raw="")
                if attack_model.predict(doc) != "b":
                    flips.append((i, word))
        assert flips == [(2, "plain")] + [(2, "you"), (2, "are")]

    def test_empty_targets_no_steps(self, attack_model, ugly_doc, plain_embeddings):
        cfg = AttackConfig(mode="targeted", generators=("synonym",),
                           embeddings=plain_embeddings, min_score=99.0)
        result = obfuscate(attack_model, ugly_doc, "b", cfg)
        assert result.success is False
        assert result.steps == ()
        assert result.adv_doc.tokens == ugly_doc.tokens

    def test_partial_decrease_kept_without_flip(self, ugly_doc):
        # 'plain' lowers o_b by 0.3 but cannot flip (bias keeps b ahead).
        model = build_hand_model(
            vocab=("you", "are", "ugly", "plain"),
            weights={"b": {"ugly": 0.3, "plain": 0.0}}, bias={"b": 1.0})
        table = EmbeddingTable(vectors={
            "ugly": np.array([1.0, 0.0]), "plain": np.array([0.9, 0.435890])}, dim=2)
        cfg = AttackConfig(mode="targeted", generators=("synonym",), embeddings=table)
        result = obfuscate(model, ugly_doc, "b", cfg)
        assert result.success is False
        assert len(result.steps) == 1
        step = result.steps[0]
        assert step.new == "plain"
        assert step.o_y_after == pytest.approx(step.o_y_before - 0.3, abs=1e-9)

    def test_non_target_tokens_untouched(self, attack_model, ugly_doc,
                                         plain_embeddings):
        cfg = AttackConfig(mode="targeted", generators=("synonym",),
                           embeddings=plain_embeddings)
        result = obfuscate(attack_model, ugly_doc, "b", cfg)
        changed = {s.token_index for s in result.steps}
        for i, (a, b) in enumerate(zip(ugly_doc.tokens, result.adv_doc.tokens)):
            if i not in changed:
                assert a == b

    def test_accepted_steps_strictly_decrease(self, attack_model, ugly_doc,
                                              plain_embeddings):
        cfg = AttackConfig(mode="targeted", generators=("synonym",),
                           embeddings=plain_embeddings)
        result = obfuscate(attack_model, ugly_doc, "b", cfg)
        for step in result.steps:
            assert step.accepted
            assert step.o_y_after < step.o_y_before

    def test_determinism(self, attack_model, ugly_doc, plain_embeddings):
        cfg = AttackConfig(mode="targeted", generators=("synonym", "flip", "space"),
                           embeddings=plain_embeddings, seed=5)
        first = obfuscate(attack_model, ugly_doc, "b", cfg)
        second = obfuscate(attack_model, ugly_doc, "b", cfg)
        assert first == second

    def test_generator_order_respected(self, ugly_doc):
        # leet before flip: the leet variant of 'ugly' is evaluated first;
        # both lower o_b to 0 (OOV), the first is kept.
        model = build_hand_model(vocab=("you", "are", "ugly"),
                                 weights={"b": {"ugly": 1.0}}, bias={"b": 0.5})
        cfg = AttackConfig(mode="targeted", generators=("leet", "flip"))
        result = obfuscate(model, ugly_doc, "b", cfg)
        kept = [s for s in result.steps if s.token_index == 2]
        assert kept[0].generator == "leet"
        assert kept[0].new == "ug1y"

    def test_wrong_mode_rejected(self, attack_model, ugly_doc):
        cfg = AttackConfig(mode="augment")
        with pytest.raises(VeilError, match="targeted"):
            obfuscate(attack_model, ugly_doc, "b", cfg)

    def test_checks_prefers_most_similar_flip(self, ugly_doc):
        # Two flipping candidates; 'plain' is far more similar to the
        # original sentence than 'orthogonal'.
        model = build_hand_model(vocab=("you", "are", "ugly", "plain", "orthogonal"),
                                 weights={"b": {"ugly": 2.0}}, bias={"a": 0.5})
        table = EmbeddingTable(vectors={
            "you": np.array([0.0, 0.0, 1.0]),
            "are": np.array([0.0, 0.0, 1.0]),
            "ugly": np.array([1.0, 0.0, 0.0]),
            "orthogonal": np.array([0.75, 0.661437, 0.0]),
            "plain": np.array([0.9, 0.435890, 0.0]),
        }, dim=3)
        cfg = AttackConfig(mode="targeted", generators=("synonym",),
                           embeddings=table, checks=True, sim_threshold=0.0,
                           synonym_config=SynonymConfig(n=50, delta=0.7))
        result = obfuscate(model, ugly_doc, "b", cfg)
        assert result.success
        assert result.steps[-1].new == "plain"


class TestAugment:
    def _model_and_table(self):
        model = build_hand_model(
            vocab=("alpha", "beta", "filler"),
            weights={"b": {"alpha": 1.0, "beta": 1.0}}, bias={})
        table = EmbeddingTable(vectors={
            "alpha": np.array([1.0, 0.0, 0.0, 0.0]),
            "a1": np.array([0.95, 0.312250, 0.0, 0.0]),
            "a2": np.array([0.90, 0.435890, 0.0, 0.0]),
            "a3": np.array([0.85, 0.526783, 0.0, 0.0]),
            "beta": np.array([0.0, 0.0, 1.0, 0.0]),
            "b1": np.array([0.0, 0.0, 0.95, 0.312250]),
        }, dim=4)
        return model, table

    def test_j_indexing_pairing(self):
        model, table = self._model_and_table()
        doc = Document(id="src", tokens=("alpha", "filler", "beta"), raw="", label="b")
        cfg = AttackConfig(mode="augment", generators=("synonym",), embeddings=table,
                           min_score=0.0, mark_token="")
        samples = augment(model, doc, "b", cfg)
        # alpha has 3 candidates, beta has 1: 3 samples; samples 2 and 3
        # substitute only alpha.
        assert len(samples) == 3
        assert samples[0].tokens == ("a1", "filler", "b1")
        assert samples[1].tokens == ("a2", "filler", "beta")
        assert samples[2].tokens == ("a3", "filler", "beta")
        assert [s.rank for s in samples] == [1, 2, 3]

    def test_max_samples_cap(self):
        model, table = self._model_and_table()
        doc = Document(id="src", tokens=("alpha", "beta"), raw="", label="b")
        cfg = AttackConfig(mode="augment", generators=("synonym",), embeddings=table,
                           min_score=0.0, max_samples=2, mark_token="")
        assert len(augment(model, doc, "b", cfg)) == 2

    def test_no_targets_above_threshold(self):
        model, table = self._model_and_table()
        doc = Document(id="src", tokens=("filler", "filler"), raw="", label="b")
        cfg = AttackConfig(mode="augment", generators=("synonym",), embeddings=table)
        assert augment(model, doc, "b", cfg) == []

    def test_mark_token_prepended_and_default(self):
        model, table = self._model_and_table()
        doc = Document(id="src", tokens=("alpha", "filler"), raw="", label="b")
        cfg = AttackConfig(mode="augment", generators=("synonym",), embeddings=table,
                           min_score=0.0)
        samples = augment(model, doc, "b", cfg)
        assert all(s.tokens[0] == "<A>" for s in samples)
        # Disabled marker:
        cfg_off = dataclasses.replace(cfg, mark_token="")
        samples_off = augment(model, doc, "b", cfg_off)
        assert all(s.tokens[0] != "<A>" for s in samples_off)

    def test_samples_differ_only_at_targets(self):
        model, table = self._model_and_table()
        doc = Document(id="src", tokens=("alpha", "filler", "beta"), raw="", label="b")
        cfg = AttackConfig(mode="augment", generators=("synonym",), embeddings=table,
                           min_score=0.0, mark_token="")
        targets = {s.token_index for sample in augment(model, doc, "b", cfg)
                   for s in sample.steps}
        for sample in augment(model, doc, "b", cfg):
            for i, (orig, new) in enumerate(zip(doc.tokens, sample.tokens)):
                if orig != new:
                    assert i in targets

    def test_sanitized_no_identity_substitutions(self):
        model, table = self._model_and_table()
        doc = Document(id="src", tokens=("alpha", "beta"), raw="", label="b")
        cfg = AttackConfig(mode="augment", generators=("synonym", "flip"),
                           embeddings=table, min_score=0.0, mark_token="")
        for sample in augment(model, doc, "b", cfg):
            for step in sample.steps:
                assert step.new.lower() != step.old.lower()

    def test_untargeted_never_gates_on_prediction(self):
        # Candidates that *raise* o_y are still applied in augment mode.
        model = build_hand_model(vocab=("alpha", "up"),
                                 weights={"b": {"alpha": 1.0, "up": 5.0}}, bias={})
        table = EmbeddingTable(vectors={"alpha": np.array([1.0, 0.0]),
                                        "up": np.array([0.95, 0.312250])}, dim=2)
        doc = Document(id="src", tokens=("alpha",), raw="", label="b")
        cfg = AttackConfig(mode="augment", generators=("synonym",), embeddings=table,
                           min_score=0.0, mark_token="")
        samples = augment(model, doc, "b", cfg)
        assert samples[0].tokens == ("up",)
        assert samples[0].steps[0].o_y_after > samples[0].steps[0].o_y_before
