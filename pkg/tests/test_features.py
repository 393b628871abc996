import math

import pytest

from veil.errors import FeatureError
from veil.features import FeatureConfig, fit, transform
from veil.text import Document, LabeledCorpus


def _corpus(token_lists, label="a"):
    docs = []
    for i, tokens in enumerate(token_lists):
        docs.append(Document(id=str(i), tokens=tuple(tokens),
                             raw=" ".join(tokens), label=label))
    return LabeledCorpus.from_documents(docs)


class TestFit:
    def test_single_doc_idf_is_one(self):
        space = fit(_corpus([["hello", "world"]]), FeatureConfig(word_ngrams=(1, 1)))
        # N = df = 1 for every gram: idf = ln(2/2) + 1 = 1.0
        assert all(v == 1.0 for v in space.idf)

    def test_smoothed_idf_formula(self):
        # N=4 docs, "shared" appears in 2: idf = ln(5/3) + 1 ~ 1.5108
        corpus = _corpus([["shared", "u1"], ["shared", "u2"], ["u3"], ["u4"]])
        space = fit(corpus, FeatureConfig(word_ngrams=(1, 1)))
        col = space.gram_index["w:shared"]
        assert space.idf[col] == pytest.approx(math.log(5 / 3) + 1, abs=1e-10)
        assert space.idf[col] == pytest.approx(1.5108256, abs=1e-6)

    def test_min_df_drops_rare_grams(self):
        corpus = _corpus([["rare", "common"], ["rare2", "common"], ["common"]])
        space = fit(corpus, FeatureConfig(word_ngrams=(1, 1), min_df=3))
        assert "w:common" in space.gram_index
        assert "w:rare" not in space.gram_index
        assert "w:rare2" not in space.gram_index

    def test_max_df_drops_too_frequent(self):
        corpus = _corpus([["stop", "x"], ["stop", "y"], ["stop", "z"], ["w"]])
        space = fit(corpus, FeatureConfig(word_ngrams=(1, 1), max_df_fraction=0.5))
        assert "w:stop" not in space.gram_index
        assert "w:x" in space.gram_index

    def test_empty_vocabulary_errors(self):
        corpus = _corpus([["one"], ["two"]])
        with pytest.raises(FeatureError, match="empty"):
            fit(corpus, FeatureConfig(word_ngrams=(1, 1), min_df=5))

    def test_columns_dense_and_lexicographic(self):
        corpus = _corpus([["b", "a", "c"]])
        space = fit(corpus, FeatureConfig(word_ngrams=(1, 1)))
        assert space.grams == ["w:a", "w:b", "w:c"]
        assert sorted(space.gram_index.values()) == [0, 1, 2]

    def test_excluded_tokens_never_indexed(self):
        corpus = _corpus([["<a>", "word", "pair"]])
        space = fit(corpus, FeatureConfig(word_ngrams=(1, 2), exclude_tokens=("<a>",)))
        assert all("<a>" not in gram for gram in space.gram_index)
        assert "w:word pair" in space.gram_index


class TestTransform:
    def test_empty_document(self):
        space = fit(_corpus([["x"]]), FeatureConfig(word_ngrams=(1, 1)))
        vec = transform(space, Document(id="e", tokens=(), raw=""))
        assert len(vec) == 0

    def test_sublinear_tf_one_is_identity(self):
        space = fit(_corpus([["x"]]), FeatureConfig(word_ngrams=(1, 1),
                                                    sublinear_tf=True))
        vec = transform(space, Document(id="d", tokens=("x",), raw="x"))
        # tf=1: (1 + ln 1) * idf = 1.0 * 1.0
        assert list(vec.values) == [1.0]

    def test_tf3_with_idf(self):
        # Rebuild the N=4/df=2 idf, then tf=3: (1+ln3) * 1.5108 ~ 3.1706
        corpus = _corpus([["shared", "u1"], ["shared", "u2"], ["u3"], ["u4"]])
        space = fit(corpus, FeatureConfig(word_ngrams=(1, 1), sublinear_tf=True))
        doc = Document(id="d", tokens=("shared",) * 3, raw="")
        vec = transform(space, doc)
        col = space.gram_index["w:shared"]
        expected = (1 + math.log(3)) * (math.log(5 / 3) + 1)
        value = dict(vec.pairs())[col]
        assert value == pytest.approx(expected, abs=1e-10)
        assert value == pytest.approx(3.17061, abs=1e-4)

    def test_binary_values_are_one(self):
        space = fit(_corpus([["x", "y"]]), FeatureConfig(word_ngrams=(1, 1),
                                                         weighting="binary"))
        doc = Document(id="d", tokens=("x", "x", "y"), raw="")
        vec = transform(space, doc)
        assert all(v == 1.0 for v in vec.values)

    def test_unknown_grams_ignored(self):
        space = fit(_corpus([["x"]]), FeatureConfig(word_ngrams=(1, 1)))
        vec = transform(space, Document(id="d", tokens=("zzz",), raw=""))
        assert len(vec) == 0

    def test_identical_token_sequences_identical_vectors(self):
        corpus = _corpus([["x", "y", "z"], ["y", "z"]])
        space = fit(corpus, FeatureConfig(word_ngrams=(1, 2)))
        d1 = Document(id="1", tokens=("x", "y"), raw="")
        d2 = Document(id="2", tokens=("x", "y"), raw="other raw")
        v1, v2 = transform(space, d1), transform(space, d2)
        assert list(v1.pairs()) == list(v2.pairs())

    def test_columns_strictly_increasing_no_zeros(self):
        corpus = _corpus([["a", "b", "c", "a"]])
        space = fit(corpus, FeatureConfig(word_ngrams=(1, 2)))
        vec = transform(space, Document(id="d", tokens=("a", "b", "a"), raw=""))
        cols = list(vec.indices)
        assert cols == sorted(cols) and len(set(cols)) == len(cols)
        assert all(v != 0.0 for v in vec.values)


class TestCharNgrams:
    def test_short_token_contributes_nothing(self):
        corpus = _corpus([["abcdef", "abc"]])
        space = fit(corpus, FeatureConfig(word_ngrams=(1, 1), char_ngrams=6))
        char_grams = [g for g in space.gram_index if g.startswith("c:")]
        assert char_grams == ["c:abcdef"]

    def test_exact_length_token_single_gram(self):
        corpus = _corpus([["sixlet"]])
        space = fit(corpus, FeatureConfig(word_ngrams=(1, 1), char_ngrams=6))
        assert "c:sixlet" in space.gram_index

    def test_within_token_only(self):
        # "ab cd" as two tokens must not produce a gram spanning the gap.
        corpus = _corpus([["abc", "def"]])
        space = fit(corpus, FeatureConfig(word_ngrams=(1, 1), char_ngrams=3))
        char_grams = sorted(g for g in space.gram_index if g.startswith("c:"))
        assert char_grams == ["c:abc", "c:def"]

    def test_l2_normalize(self):
        corpus = _corpus([["x", "y"]])
        space = fit(corpus, FeatureConfig(word_ngrams=(1, 1), l2_normalize=True))
        vec = transform(space, Document(id="d", tokens=("x", "y"), raw=""))
        norm = sum(v * v for v in vec.values) ** 0.5
        assert norm == pytest.approx(1.0, abs=1e-12)


def test_invalid_configs_rejected():
    with pytest.raises(FeatureError):
        FeatureConfig(word_ngrams=(0, 2))
    with pytest.raises(FeatureError):
        FeatureConfig(word_ngrams=(2, 1))
    with pytest.raises(FeatureError):
        FeatureConfig(word_ngrams=(1, 4))
    with pytest.raises(FeatureError):
        FeatureConfig(min_df=0)
    with pytest.raises(FeatureError):
        FeatureConfig(weighting="counts")
    with pytest.raises(FeatureError):
        FeatureConfig(max_df_fraction=0.0)
