import difflib
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from halluspan.matcher import MatchPool, find_matches, sequence_similarity
from halluspan.segmenter import enumerate_windows, segment_samples, tokenize
from oracles import brute_matched_size, brute_ratio


@pytest.mark.parametrize("a,b,expected", [("abc", "abc", 1.0), ("abcd", "wxyz", 0.0), ("abcd", "bcde", 0.75), ("", "", 1.0)])
def test_similarity_examples(a, b, expected):
    assert sequence_similarity(a, b) == expected
    assert brute_ratio(a, b) == expected


def test_similarity_is_case_folded():
    assert sequence_similarity("Paris", "PARIS") == 1.0


def test_backends_agree_with_oracle(backend):
    rng = random.Random(7)
    for _ in range(500):
        a = "".join(rng.choice("abc ") for _ in range(rng.randint(0, 14)))
        b = "".join(rng.choice("abc ") for _ in range(rng.randint(0, 14)))
        assert backend.matched_size(a, b) == brute_matched_size(a, b)
    assert backend.ratios("abcd", ["bcde", "abcd", ""]) == [0.75, 1.0, 0.0]


def test_backends_agree_with_difflib_on_unicode(backend):
    rng = random.Random(3)
    alphabet = "aé中ب ि"
    for _ in range(300):
        a = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 30)))
        b = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 30)))
        sm = difflib.SequenceMatcher(None, a, b, autojunk=False)
        assert backend.matched_size(a, b) == sum(m.size for m in sm.get_matching_blocks())


@given(st.text(max_size=30), st.text(max_size=30))
def test_similarity_bounds(a, b):
    r = sequence_similarity(a, b)
    assert 0.0 <= r <= 1.0
    assert sequence_similarity(a, a) == 1.0


def _pool(samples, w=4, t=2):
    return segment_samples(samples, "en", w, t)


def test_exact_matches_each_sample():
    phrase = "alpha beta gamma delta"
    win = enumerate_windows(tokenize(phrase, "en"), 4, 2)[0]
    m = find_matches(win, _pool([phrase] * 5), 0.4)
    assert m.matched_sample_count == 5


def test_threshold_one_is_strict():
    phrase = "alpha beta gamma delta"
    win = enumerate_windows(tokenize(phrase, "en"), 4, 2)[0]
    assert len(find_matches(win, _pool([phrase] * 5), 1.0)) == 0


def test_find_matches_against_exhaustive_oracle():
    win = enumerate_windows(tokenize("the cat sat on", "en"), 4, 2)[0]
    samples = [
        "quick brown foxes jump the cat sat on over lazy dogs",
        "zebras graze quietly while the cat sat on rugs indoors",
    ]
    pool = _pool(samples)
    m = find_matches(win, pool, 0.4)
    # oracle: score every pool entry, keep the best above threshold per sample
    best = {}
    for idx, cand in pool:
        sim = brute_ratio(win.text, cand.text)
        if sim > 0.4 and (idx not in best or sim > best[idx][0]):
            best[idx] = (sim, cand.start)
    assert [(x.sample_index, x.similarity, x.window.start) for x in m.matches] == [
        (idx, sim, start) for idx, (sim, start) in sorted(best.items())
    ]
    assert [x.similarity for x in m.matches] == [1.0, 1.0]


def test_cap_keeps_top_matches_per_sample():
    win = enumerate_windows(tokenize("a b c d", "en"), 4, 4)[0]
    pool = _pool(["a b c d a b c x a b c d"], w=4, t=1)
    one = find_matches(win, pool, 0.4, cap=1)
    three = find_matches(win, pool, 0.4, cap=3)
    assert len(one) == 1 and one.matches[0].similarity == 1.0 and one.matches[0].window.start == 0
    assert len(three) == 3
    assert three.matched_sample_count == 1


def test_permutation_invariance_and_monotone_threshold():
    rng = random.Random(11)
    words = "red blue green paris france river bank old new".split()
    samples = [" ".join(rng.choice(words) for _ in range(9)) for _ in range(6)]
    pool = _pool(samples)
    win = enumerate_windows(tokenize("old paris river bank", "en"), 4, 2)[0]
    base = find_matches(win, pool, 0.3, cap=2)
    shuffled = list(pool)
    rng.shuffle(shuffled)
    assert find_matches(win, MatchPool(shuffled), 0.3, cap=2) == base
    counts = [find_matches(win, pool, tau, cap=2).matched_sample_count for tau in (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)]
    assert counts == sorted(counts, reverse=True)
    assert all(x.similarity > 0.3 for x in base.matches)


def test_empty_pool():
    win = enumerate_windows(tokenize("a b", "en"), 4, 2)[0]
    m = find_matches(win, [], 0.4)
    assert len(m) == 0 and m.matched_sample_count == 0
