"""Scoring oracles: exhaustive reimplementations of unigram precision, the
token-set similarity, ROC-AUC, the weight sweep, and agreement statistics."""
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rewritelab.errors import ConfigurationError, ContractError, ProtocolError
from rewritelab.rewards import (
    AgreementStats,
    RewardWeights,
    agreement_stats,
    bleu1,
    composite_reward,
    format_judge_messages,
    fuzzy_token_set,
    parse_verdict,
    roc_auc,
    simplex_sweep,
    tokenize,
    write_sweep_csv,
)

TOL = 1e-9

words = st.sampled_from(["alpha", "beta", "gamma", "delta"])
phrases = st.lists(words, min_size=0, max_size=5).map(" ".join)


# --- independent oracles -------------------------------------------------

def _oracle_tokens(text):
    out = []
    for piece in text.lower().split():
        piece = piece.strip("!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~")
        if piece:
            out.append(piece)
    return out


def _oracle_bleu1(candidate, references):
    cand = _oracle_tokens(candidate)
    if not cand:
        return 0.0
    best = 0.0
    for ref in references:
        ref_tokens = _oracle_tokens(ref)
        matched = 0
        remaining = list(ref_tokens)
        for tok in cand:
            if tok in remaining:
                remaining.remove(tok)
                matched += 1
        best = max(best, matched / len(cand))
    return min(best, 1.0)


def _oracle_indel(a, b):
    # full DP table, no rolling rows
    table = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(len(a) + 1):
        table[i][0] = i
    for j in range(len(b) + 1):
        table[0][j] = j
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                table[i][j] = table[i - 1][j - 1]
            else:
                table[i][j] = 1 + min(table[i - 1][j], table[i][j - 1])
    return table[len(a)][len(b)]


def _oracle_sim(a, b):
    total = len(a) + len(b)
    if total == 0:
        return 1.0
    return 1.0 - _oracle_indel(a, b) / total


def _oracle_fuzzy(candidate, reference):
    cand = set(_oracle_tokens(candidate))
    ref = set(_oracle_tokens(reference))
    if not cand and not ref:
        return 1.0
    if not cand or not ref:
        return 0.0
    inter = " ".join(sorted(cand & ref))
    a = " ".join(sorted(cand & ref) + sorted(cand - ref))
    b = " ".join(sorted(cand & ref) + sorted(ref - cand))
    return max(_oracle_sim(a, b), _oracle_sim(inter, a), _oracle_sim(inter, b))


def _oracle_auc_pairwise(scores, labels):
    pos = [s for s, l in zip(scores, labels) if l]
    neg = [s for s, l in zip(scores, labels) if not l]
    total = 0.0
    for p in pos:
        for q in neg:
            total += 1.0 if p > q else 0.5 if p == q else 0.0
    return total / (len(pos) * len(neg))


def _oracle_auc_trapezoid(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    thresholds = np.unique(scores)[::-1]
    tpr = [0.0]
    fpr = [0.0]
    for thr in thresholds:
        sel = scores >= thr
        tpr.append(np.sum(sel & labels) / labels.sum())
        fpr.append(np.sum(sel & ~labels) / (~labels).sum())
    return float(np.trapezoid(tpr, fpr))


# --- tokenizer and unigram precision -------------------------------------

def test_tokenize_lowercases_and_strips_punctuation():
    assert tokenize("The cat, sat!") == ["the", "cat", "sat"]
    assert tokenize("  ") == []
    assert tokenize("a-b 'quoted' (x)") == ["a-b", "quoted", "x"]


def test_bleu1_identity():
    assert bleu1("answer", "answer") == pytest.approx(1.0, abs=TOL)


def test_bleu1_disjoint():
    assert bleu1("alpha beta", "gamma delta") == pytest.approx(0.0, abs=TOL)


def test_bleu1_hand_value():
    assert bleu1("the cat sat", "the cat slept") == pytest.approx(2.0 / 3.0, abs=TOL)


def test_bleu1_empty_candidate():
    assert bleu1("", "anything") == 0.0
    assert bleu1("...", "anything") == 0.0


def test_bleu1_no_references_rejected():
    with pytest.raises(ContractError):
        bleu1("text", [])


def test_bleu1_multi_reference_takes_best():
    score = bleu1("the cat sat", ["dog", "the cat sat there"])
    assert score == pytest.approx(1.0, abs=TOL)


def test_bleu1_clipping_repeated_tokens():
    # candidate repeats a token more often than the reference has it
    assert bleu1("a a a", "a b") == pytest.approx(1.0 / 3.0, abs=TOL)


def test_bleu1_exhaustive_against_counting_oracle():
    vocab = ["alpha", "beta", "gamma"]
    texts = [
        " ".join(combo)
        for n in range(0, 4)
        for combo in itertools.product(vocab, repeat=n)
    ]
    for cand in texts:
        for ref in texts[:20]:
            if not ref.strip() and not cand.strip():
                continue
            got = bleu1(cand, [ref])
            want = _oracle_bleu1(cand, [ref])
            assert got == pytest.approx(want, abs=TOL), (cand, ref)


# --- token-set similarity -------------------------------------------------

def test_fuzzy_identity_and_permutation():
    assert fuzzy_token_set("new york city", "new york city") == pytest.approx(1.0)
    assert fuzzy_token_set("city new york", "york city new") == pytest.approx(1.0)


def test_fuzzy_hand_value():
    assert fuzzy_token_set("alpha beta", "alpha gamma") == pytest.approx(2.0 / 3.0, abs=TOL)


def test_fuzzy_empty_conventions():
    assert fuzzy_token_set("", "") == 1.0
    assert fuzzy_token_set("", "word") == 0.0
    assert fuzzy_token_set("word", "") == 0.0


@given(phrases, phrases)
@settings(max_examples=300)
def test_fuzzy_matches_independent_oracle(a, b):
    assert fuzzy_token_set(a, b) == pytest.approx(_oracle_fuzzy(a, b), abs=TOL)


@given(phrases, phrases)
@settings(max_examples=200)
def test_fuzzy_bounded_and_symmetric(a, b):
    score = fuzzy_token_set(a, b)
    assert 0.0 <= score <= 1.0
    assert score == pytest.approx(fuzzy_token_set(b, a), abs=TOL)


@given(st.lists(words, min_size=1, max_size=5))
def test_fuzzy_order_invariance(tokens):
    base = " ".join(tokens)
    shuffled = " ".join(reversed(tokens))
    assert fuzzy_token_set(base, shuffled) == pytest.approx(1.0, abs=TOL)


# --- composite reward -----------------------------------------------------

def test_weights_must_form_simplex():
    with pytest.raises(ConfigurationError):
        RewardWeights(0.5, 0.3, 0.1)
    with pytest.raises(ConfigurationError):
        RewardWeights(1.2, -0.1, -0.1)
    assert RewardWeights(0.6, 0.3, 0.1).as_tuple() == (0.6, 0.3, 0.1)


def test_composite_hand_values():
    assert composite_reward(1.0, 1.0, 1.0).total == pytest.approx(1.0, abs=TOL)
    assert composite_reward(0.0, 0.0, 0.0).total == pytest.approx(0.0, abs=TOL)
    assert composite_reward(1.0, 0.5, 0.2).total == pytest.approx(0.77, abs=TOL)


def test_composite_rejects_out_of_range_components():
    with pytest.raises(ContractError, match="s_fuzz"):
        composite_reward(0.5, 1.5, 0.5)
    with pytest.raises(ContractError, match="s_llm"):
        composite_reward(-0.1, 0.5, 0.5)


@given(
    st.floats(min_value=0.0, max_value=1.0),
    st.floats(min_value=0.0, max_value=1.0),
    st.floats(min_value=0.0, max_value=1.0),
)
def test_composite_stays_in_unit_interval(a, b, c):
    assert 0.0 <= composite_reward(a, b, c).total <= 1.0


# --- judge plumbing --------------------------------------------------------

def test_parse_verdict_variants():
    assert parse_verdict("CORRECT") == 1
    assert parse_verdict("INCORRECT") == 0
    assert parse_verdict("The answer is correct.") == 1
    assert parse_verdict("verdict: incorrect, missing the year") == 0


def test_parse_verdict_unparseable():
    with pytest.raises(ProtocolError):
        parse_verdict("maybe")


def test_judge_messages_sections():
    system, user = format_judge_messages("Q?", ["a1", "a2"], "my answer")
    assert "CORRECT or INCORRECT" in system["content"]
    assert "Reference answers:\n- a1\n- a2" in user["content"]
    assert user["content"].endswith("Candidate answer:\nmy answer")
    with pytest.raises(ContractError):
        format_judge_messages("Q?", [], "x")


# --- ROC-AUC ----------------------------------------------------------------

def test_auc_separated_and_degenerate():
    assert roc_auc([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0]) == pytest.approx(1.0)
    assert roc_auc([0.5, 0.5, 0.5, 0.5], [1, 0, 1, 0]) == pytest.approx(0.5)


def test_auc_hand_pair_count():
    assert roc_auc([0.9, 0.7, 0.8], [1, 1, 0]) == pytest.approx(0.5, abs=TOL)


def test_auc_requires_both_classes():
    with pytest.raises(ContractError):
        roc_auc([0.1, 0.2], [1, 1])


def test_auc_matches_both_oracles_with_ties():
    rng = np.random.default_rng(5)
    for _ in range(25):
        n = int(rng.integers(4, 40))
        scores = rng.integers(0, 5, size=n) / 4.0
        labels = rng.integers(0, 2, size=n)
        if labels.sum() in (0, n):
            labels[0] = 1 - labels[0]
        got = roc_auc(scores, labels)
        assert got == pytest.approx(_oracle_auc_pairwise(scores, labels), abs=TOL)
        assert got == pytest.approx(_oracle_auc_trapezoid(scores, labels), abs=TOL)


# --- simplex sweep -----------------------------------------------------------

def _labeled_components(n=60, seed=0):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, size=n)
    comp = np.empty((n, 3))
    for i, label in enumerate(labels):
        if label:
            comp[i] = [rng.random() * 0.3 + 0.7, rng.beta(4, 2), rng.beta(3, 2)]
        else:
            comp[i] = [rng.random() * 0.3, rng.beta(2, 4), rng.beta(2, 3)]
    if labels.sum() in (0, n):
        labels[0] = 1 - labels[0]
    return comp, labels


def test_sweep_half_grid_enumerates_six_cells():
    comp, labels = _labeled_components()
    cells = simplex_sweep(comp, labels, grid_step=0.5)
    got = {(c.alpha, c.beta, c.gamma) for c in cells}
    assert got == {
        (1.0, 0.0, 0.0),
        (0.5, 0.5, 0.0),
        (0.5, 0.0, 0.5),
        (0.0, 1.0, 0.0),
        (0.0, 0.5, 0.5),
        (0.0, 0.0, 1.0),
    }


def test_sweep_default_grid_has_231_cells_on_simplex():
    comp, labels = _labeled_components()
    cells = simplex_sweep(comp, labels, grid_step=0.05)
    assert len(cells) == 231
    for cell in cells:
        assert cell.alpha + cell.beta + cell.gamma == pytest.approx(1.0, abs=TOL)
    aucs = [c.auc for c in cells]
    assert aucs == sorted(aucs, reverse=True)


def test_sweep_identical_components_all_half():
    comp = np.ones((10, 3)) * 0.4
    labels = [1, 0] * 5
    cells = simplex_sweep(comp, labels, grid_step=0.25)
    assert all(c.auc == pytest.approx(0.5, abs=TOL) for c in cells)


def test_sweep_perfect_component_scores_one():
    rng = np.random.default_rng(1)
    labels = np.array([1, 0] * 10)
    comp = np.column_stack([
        labels * 0.5 + 0.5,          # perfectly separating
        rng.random(20),
        rng.random(20),
    ])
    cells = simplex_sweep(comp, labels, grid_step=0.5)
    pure = [c for c in cells if c.alpha == 1.0]
    assert pure[0].auc == pytest.approx(1.0, abs=TOL)


def test_sweep_top_band_contains_argmax_and_respects_cutoff():
    comp, labels = _labeled_components(seed=3)
    cells = simplex_sweep(comp, labels, grid_step=0.05)
    aucs = np.array([c.auc for c in cells])
    cutoff = aucs.max() - 0.01 * (aucs.max() - aucs.min())
    assert cells[0].top1pct
    for cell in cells:
        assert cell.top1pct == (cell.auc >= cutoff)


def test_sweep_rejects_uneven_grid():
    comp, labels = _labeled_components()
    with pytest.raises(ConfigurationError):
        simplex_sweep(comp, labels, grid_step=0.3)


def test_sweep_csv_deterministic(tmp_path):
    comp, labels = _labeled_components(seed=9)
    cells = simplex_sweep(comp, labels, grid_step=0.25)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_sweep_csv(cells, p1)
    write_sweep_csv(cells, p2)
    content = p1.read_text()
    assert content == p2.read_text()
    assert content.splitlines()[0] == "alpha,beta,gamma,auc,top1pct_flag"
    assert len(content.splitlines()) == len(cells) + 1


# --- agreement ----------------------------------------------------------------

def test_agreement_identical():
    stats = agreement_stats([1, 0, 1, 0], [1, 0, 1, 0])
    assert stats == AgreementStats(1.0, 1.0, 1.0)


def test_agreement_constant_sequence_kappa_zero():
    stats = agreement_stats([1, 1, 1], [1, 1, 1])
    assert stats.agreement == 1.0
    assert stats.kappa == 0.0


def test_agreement_hand_confusion_matrix():
    a = [1] * 40 + [0] * 40 + [1] * 10 + [0] * 10
    b = [1] * 40 + [0] * 40 + [0] * 10 + [1] * 10
    stats = agreement_stats(a, b)
    assert stats.agreement == pytest.approx(0.8, abs=TOL)
    assert stats.kappa == pytest.approx(0.6, abs=TOL)
    assert stats.mcc == pytest.approx(0.6, abs=TOL)


def test_agreement_rejects_nonbinary():
    with pytest.raises(ContractError):
        agreement_stats([0, 2], [0, 1])
    with pytest.raises(ContractError):
        agreement_stats([0, 1], [0, 1, 1])
