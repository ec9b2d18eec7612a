import numpy as np
import pytest

from difftts import textfront as tf


def test_build_vocab_sorted_assignment():
    vocab = tf.build_vocab(["ab", "ba"])
    assert vocab.symbol_to_id == {"a": 2, "b": 3}


def test_build_vocab_dedupes():
    vocab = tf.build_vocab(["aaa", "aa"])
    assert vocab.symbol_to_id == {"a": 2}


def test_build_vocab_deterministic():
    corpus = ["hello", "world"]
    assert tf.build_vocab(corpus).symbol_to_id == tf.build_vocab(corpus).symbol_to_id


def test_build_vocab_empty_corpus():
    with pytest.raises(tf.VocabularyError):
        tf.build_vocab([])


def test_encode_basic():
    vocab = tf.Vocabulary({"a": 2, "b": 3})
    seq = tf.encode_text("ab", vocab)
    np.testing.assert_array_equal(seq.ids, [2, 3])
    assert seq.mask.all()


def test_encode_unknown_fallback():
    vocab = tf.Vocabulary({"a": 2})
    seq = tf.encode_text("ax", vocab)
    np.testing.assert_array_equal(seq.ids, [2, tf.UNK_ID])


def test_encode_prephonemized():
    vocab = tf.Vocabulary({"a": 2, "k": 3, "t": 4})
    seq = tf.encode_text("k a t", vocab, mode="phonemes")
    assert len(seq) == 3
    np.testing.assert_array_equal(seq.ids, [3, 2, 4])


def test_encode_empty_after_normalization():
    vocab = tf.Vocabulary({"a": 2})
    with pytest.raises(tf.EmptyTextError):
        tf.encode_text("   ", vocab)


def test_encode_decode_round_trip():
    corpus = ["monotonic", "alignment"]
    vocab = tf.build_vocab(corpus)
    for text in corpus:
        seq = tf.encode_text(text, vocab)
        assert tf.decode_ids(seq.ids, vocab) == text


def test_pad_batch():
    vocab = tf.Vocabulary({"a": 2, "b": 3})
    seqs = [tf.encode_text("ab", vocab), tf.encode_text("aba", vocab)]
    ids, masks = tf.pad_batch(seqs)
    assert ids.shape == (2, 3)
    np.testing.assert_array_equal(ids[0], [2, 3, tf.PAD_ID])
    np.testing.assert_array_equal(masks[0], [True, True, False])


def test_pad_batch_single_identity():
    vocab = tf.Vocabulary({"a": 2})
    seq = tf.encode_text("aa", vocab)
    ids, masks = tf.pad_batch([seq])
    np.testing.assert_array_equal(ids[0], seq.ids)
    assert masks.all()


def test_pad_batch_equal_lengths_no_padding():
    vocab = tf.Vocabulary({"a": 2, "b": 3})
    ids, masks = tf.pad_batch([tf.encode_text("ab", vocab), tf.encode_text("ba", vocab)])
    assert masks.all()


def test_vocab_file_round_trip(tmp_path):
    vocab = tf.build_vocab(["abc def", "ghi"])
    p = tmp_path / "vocab.tsv"
    tf.save_vocab(p, vocab)
    assert tf.load_vocab(p).symbol_to_id == vocab.symbol_to_id


def test_sequence_invariants():
    with pytest.raises(ValueError):
        tf.PhonemeSequence(np.array([tf.PAD_ID]), np.array([True]))
    with pytest.raises(ValueError):
        tf.PhonemeSequence(np.array([2]), np.array([False]))
