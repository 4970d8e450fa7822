"""Collective-cognition pathway: encoders, claim matching, memory, decoder."""

import numpy as np
import pytest

from cicd.ced import (build_memory, claim_match, decode_global, embed_tokens,
                      encode_bilstm, last_unmasked_index)
from cicd.data import ClaimInstance, build_vocab, encode_batch
from cicd.errors import AllMasked
from cicd.model import DualViewModel
from cicd.optim import grad_check
from cicd.tensor import Tensor, reshape, tsum

from conftest import make_corpus, make_micro_config
from reference import bilstm_loops, claim_match_loops, decoder_loops


def micro_parts(corpus=None, seed=11, **over):
    cfg = make_micro_config(**over)
    corpus = corpus if corpus is not None else make_corpus()
    vocab = build_vocab(corpus)
    model = DualViewModel.build(cfg, vocab, np.random.default_rng(seed))
    batch = encode_batch(corpus, vocab, cfg)
    return cfg, model.params, vocab, batch


def memory_for(cfg, params, batch, bi):
    n = int(batch.article_count[bi])
    art_mask = batch.article_mask[bi][:n]
    embs = [embed_tokens(params, batch.article_ids[bi][i], cfg) for i in range(n)]
    claim_states = encode_bilstm(batch.claim_ids[bi], batch.claim_mask[bi],
                                 params, "claim_enc", cfg)
    return build_memory(embs, art_mask, claim_states, batch.claim_mask[bi],
                        params, cfg)


def lstm_weights(params, prefix):
    return {key: params[f"{prefix}.{key}"].data
            for key in ("fw.wx", "fw.wh", "fw.b", "bw.wx", "bw.wh", "bw.b")}


class TestEncodeBilstm:
    def test_output_width_is_twice_hidden(self):
        cfg, params, vocab, batch = micro_parts()
        states = encode_bilstm(batch.claim_ids[0], batch.claim_mask[0],
                               params, "claim_enc", cfg)
        assert states.data.shape == (cfg.p, 2 * cfg.d_h)

    def test_paper_width_240(self):
        corpus = [ClaimInstance("x", "a b c", ["a b"], 0)]
        cfg, params, vocab, batch = micro_parts(corpus, d_h=120, d=240, p=4, l=6)
        states = encode_bilstm(batch.claim_ids[0], batch.claim_mask[0],
                               params, "claim_enc", cfg)
        assert states.data.shape[1] == 240

    def test_all_pad_gives_zeros(self):
        cfg, params, vocab, batch = micro_parts()
        mask = np.zeros(cfg.p, dtype=bool)
        states = encode_bilstm(batch.claim_ids[0], mask, params, "claim_enc", cfg)
        np.testing.assert_array_equal(states.data, np.zeros((cfg.p, 2 * cfg.d_h)))

    def test_masked_positions_zero_interior_hole(self):
        cfg, params, vocab, batch = micro_parts()
        mask = batch.claim_mask[0].copy()
        mask[1] = False  # punch a hole
        states = encode_bilstm(batch.claim_ids[0], mask, params, "claim_enc", cfg)
        np.testing.assert_array_equal(states.data[1], np.zeros(2 * cfg.d_h))

    def test_matches_loop_oracle(self):
        cfg, params, vocab, batch = micro_parts()
        emb = embed_tokens(params, batch.claim_ids[0], cfg)
        states = encode_bilstm(batch.claim_ids[0], batch.claim_mask[0],
                               params, "claim_enc", cfg)
        expected = bilstm_loops(emb.data, batch.claim_mask[0],
                                lstm_weights(params, "claim_enc"))
        assert np.max(np.abs(states.data - expected)) < 1e-12

    def test_backward_direction_is_reversed_forward(self):
        cfg, params, vocab, batch = micro_parts()
        mask = batch.claim_mask[0]
        n_real = int(mask.sum())
        emb = embed_tokens(params, batch.claim_ids[0], cfg)
        states = encode_bilstm(batch.claim_ids[0], mask, params, "claim_enc", cfg)
        backward_half = states.data[:n_real, cfg.d_h:]
        # oracle: run the forward recurrence with backward weights over the
        # reversed prefix, then re-reverse
        w = lstm_weights(params, "claim_enc")
        swapped = {"fw.wx": w["bw.wx"], "fw.wh": w["bw.wh"], "fw.b": w["bw.b"],
                   "bw.wx": w["fw.wx"], "bw.wh": w["fw.wh"], "bw.b": w["fw.b"]}
        rev_emb = emb.data[:n_real][::-1]
        rev_states = bilstm_loops(rev_emb, np.ones(n_real, dtype=bool), swapped)
        oracle = rev_states[:, :cfg.d_h][::-1]
        assert np.max(np.abs(backward_half - oracle)) < 1e-12


class TestClaimMatch:
    def test_zero_weight_averages_claim(self):
        cfg, params, vocab, batch = micro_parts()
        mem = memory_for(cfg, params, batch, 0)
        zero_w = Tensor(np.zeros((cfg.state_width, cfg.state_width)))
        raw = encode_bilstm(batch.article_ids[0][0], batch.article_mask[0][0],
                            params, "article_enc", cfg)
        matched, weights = claim_match(raw, mem.claim_states,
                                       batch.claim_mask[0], zero_w)
        n_claim = int(batch.claim_mask[0].sum())
        mean_state = mem.claim_states.data[:n_claim].mean(axis=0)
        for i in range(matched.data.shape[0]):
            np.testing.assert_allclose(matched.data[i], mean_state, atol=1e-9)

    def test_single_claim_token(self):
        corpus = [ClaimInstance("x", "single", ["a b c", "d e"], 0)]
        cfg, params, vocab, batch = micro_parts(corpus)
        mem = memory_for(cfg, params, batch, 0)
        raw = encode_bilstm(batch.article_ids[0][0], batch.article_mask[0][0],
                            params, "article_enc", cfg)
        matched, _ = claim_match(raw, mem.claim_states, batch.claim_mask[0],
                                 params["match_w"])
        for i in range(matched.data.shape[0]):
            np.testing.assert_allclose(matched.data[i], mem.claim_states.data[0],
                                       atol=1e-9)

    def test_matches_loop_oracle(self):
        cfg, params, vocab, batch = micro_parts()
        claim_states = encode_bilstm(batch.claim_ids[0], batch.claim_mask[0],
                                     params, "claim_enc", cfg)
        raw = encode_bilstm(batch.article_ids[0][0], batch.article_mask[0][0],
                            params, "article_enc", cfg)
        matched, _ = claim_match(raw, claim_states, batch.claim_mask[0],
                                 params["match_w"])
        oracle = claim_match_loops(raw.data, claim_states.data,
                                   batch.claim_mask[0], params["match_w"].data)
        assert np.max(np.abs(matched.data - oracle)) < 1e-12

    def test_fully_masked_claim_raises(self):
        cfg, params, vocab, batch = micro_parts()
        claim_states = encode_bilstm(batch.claim_ids[0], batch.claim_mask[0],
                                     params, "claim_enc", cfg)
        raw = encode_bilstm(batch.article_ids[0][0], batch.article_mask[0][0],
                            params, "article_enc", cfg)
        with pytest.raises(AllMasked):
            claim_match(raw, claim_states, np.zeros(cfg.p, dtype=bool),
                        params["match_w"])


class TestBuildMemory:
    def test_single_article_one_sentence_row(self):
        corpus = [ClaimInstance("x", "claim words", ["only article"], 0)]
        cfg, params, vocab, batch = micro_parts(corpus)
        mem = memory_for(cfg, params, batch, 0)
        assert mem.sent_states.data.shape == (1, cfg.state_width)

    def test_identical_articles_identical_sentence_rows(self):
        corpus = [ClaimInstance("x", "claim words", ["same text here"] * 2, 0)]
        cfg, params, vocab, batch = micro_parts(corpus)
        mem = memory_for(cfg, params, batch, 0)
        np.testing.assert_array_equal(mem.sent_states.data[0], mem.sent_states.data[1])

    def test_last_position_extraction_index_oracle(self):
        corpus = [ClaimInstance("x", "claim words", ["a b c d", "e f", "g h i"], 0)]
        cfg, params, vocab, batch = micro_parts(corpus)
        mem = memory_for(cfg, params, batch, 0)
        for i in range(3):
            raw = encode_bilstm(batch.article_ids[0][i], batch.article_mask[0][i],
                                params, "article_enc", cfg)
            last = last_unmasked_index(batch.article_mask[0][i])
            np.testing.assert_array_equal(mem.sent_states.data[i], raw.data[last])

    def test_masked_word_rows_stay_zero(self):
        cfg, params, vocab, batch = micro_parts()
        mem = memory_for(cfg, params, batch, 0)
        masked_rows = mem.word_states.data[~mem.word_mask]
        np.testing.assert_array_equal(masked_rows, np.zeros_like(masked_rows))


class TestDecodeGlobal:
    def test_gamma_rows_sum_to_one(self):
        cfg, params, vocab, batch = micro_parts()
        mem = memory_for(cfg, params, batch, 0)
        ev = decode_global(mem, params, cfg)
        sums = ev.gamma.reshape(cfg.o, -1).sum(axis=1)
        np.testing.assert_allclose(sums, np.ones(cfg.o), atol=1e-9)

    def test_matches_loop_oracle(self):
        corpus = [ClaimInstance("x", "claim words", ["a b c", "d e f"], 0)]
        cfg, params, vocab, batch = micro_parts(corpus, l=3, o=2, k=1)
        mem = memory_for(cfg, params, batch, 0)
        ev = decode_global(mem, params, cfg)
        pars = {name: params[name].data for name in (
            "decoder.wx", "decoder.wh", "decoder.b", "decoder.init_w",
            "decoder.init_b", "decoder.start", "word_score_w", "sent_score_w",
            "combine_w")}
        g, gamma = decoder_loops(mem.word_states.data, mem.word_mask,
                                 mem.sent_states.data, mem.sent_mask, pars, cfg.o)
        assert np.max(np.abs(ev.g.data - g)) < 1e-12
        assert np.max(np.abs(ev.gamma.reshape(cfg.o, -1) - gamma)) < 1e-12

    def test_single_article_beta_degenerates(self):
        corpus = [ClaimInstance("x", "claim words", ["a b c d e"], 0)]
        cfg, params, vocab, batch = micro_parts(corpus)
        mem = memory_for(cfg, params, batch, 0)
        ev = decode_global(mem, params, cfg)
        pars = {name: params[name].data for name in (
            "decoder.wx", "decoder.wh", "decoder.b", "decoder.init_w",
            "decoder.init_b", "decoder.start", "word_score_w", "sent_score_w",
            "combine_w")}
        g, gamma = decoder_loops(mem.word_states.data, mem.word_mask,
                                 mem.sent_states.data, mem.sent_mask, pars, cfg.o,
                                 use_beta=False)
        assert np.max(np.abs(ev.gamma.reshape(cfg.o, -1) - gamma)) < 1e-12
        assert np.max(np.abs(ev.g.data - g)) < 1e-12

    def test_article_permutation_leaves_g_unchanged(self):
        corpus = [ClaimInstance("x", "claim words", ["a b c", "d e f g", "h i"], 0)]
        cfg, params, vocab, batch = micro_parts(corpus)
        mem = memory_for(cfg, params, batch, 0)
        ev = decode_global(mem, params, cfg)

        perm = [2, 0, 1]
        ids_p = batch.article_ids[0][perm]
        mask_p = batch.article_mask[0][perm]
        embs = [embed_tokens(params, ids_p[i], cfg) for i in range(3)]
        claim_states = encode_bilstm(batch.claim_ids[0], batch.claim_mask[0],
                                     params, "claim_enc", cfg)
        mem_p = build_memory(embs, mask_p, claim_states, batch.claim_mask[0],
                             params, cfg)
        ev_p = decode_global(mem_p, params, cfg)
        np.testing.assert_allclose(ev_p.g.data, ev.g.data, atol=1e-9)
        np.testing.assert_allclose(ev_p.gamma, ev.gamma[:, perm, :], atol=1e-9)
        np.testing.assert_allclose(ev_p.beta, ev.beta[:, perm], atol=1e-9)

    def test_masked_article_outside_gamma_support(self):
        cfg, params, vocab, batch = micro_parts()
        bi = 0
        n = int(batch.article_count[bi])
        assert n >= 2
        art_mask = batch.article_mask[bi][:n].copy()
        art_mask[1, :] = False
        embs = [embed_tokens(params, batch.article_ids[bi][i], cfg) for i in range(n)]
        claim_states = encode_bilstm(batch.claim_ids[bi], batch.claim_mask[bi],
                                     params, "claim_enc", cfg)
        mem = build_memory(embs, art_mask, claim_states, batch.claim_mask[bi],
                           params, cfg)
        ev = decode_global(mem, params, cfg)
        np.testing.assert_array_equal(ev.gamma[:, 1, :], np.zeros((cfg.o, cfg.l)))
        sums = ev.gamma.reshape(cfg.o, -1).sum(axis=1)
        np.testing.assert_allclose(sums, np.ones(cfg.o), atol=1e-9)

    def test_no_merge_gamma_still_sums_to_one(self):
        cfg, params, vocab, batch = micro_parts(no_merge=True)
        mem = memory_for(cfg, params, batch, 0)
        ev = decode_global(mem, params, cfg)
        sums = ev.gamma.reshape(cfg.o, -1).sum(axis=1)
        np.testing.assert_allclose(sums, np.ones(cfg.o), atol=1e-9)

    def test_attention_weight_gradients_match_fd(self):
        cfg, params, vocab, batch = micro_parts()

        def loss():
            mem = memory_for(cfg, params, batch, 0)
            ev = decode_global(mem, params, cfg)
            return tsum(reshape(ev.g, (1, cfg.global_width)))

        pts = [params["sent_score_w"], params["word_score_w"], params["combine_w"]]
        assert grad_check(loss, pts) < 1e-4

    def test_diagnostics_vocab_distribution(self):
        cfg, params, vocab, batch = micro_parts()
        mem = memory_for(cfg, params, batch, 0)
        ev = decode_global(mem, params, cfg, collect_diag=True)
        assert ev.vocab_probs.shape == (cfg.o, len(vocab))
        np.testing.assert_allclose(ev.vocab_probs.sum(axis=1), np.ones(cfg.o),
                                   atol=1e-9)
        assert all(len(tw) == 10 for tw in ev.top_words)
