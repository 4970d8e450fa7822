"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines alongside pytest's own verdicts.
"""

import json
import time

import numpy as np
import pytest

from cicd import ced, isi
from cicd.cli import main
from cicd.config import config_from_dict
from cicd.data import ClaimInstance, Vocab, build_vocab, encode_batch
from cicd.metrics import evaluate
from cicd.model import DualViewModel, inconsistency_loss
from cicd.optim import grad_check
from cicd.params import build_params, load_checkpoint, save_checkpoint
from cicd.synthetic import SyntheticParams, gen_synthetic
from cicd.tensor import EPS, Tensor, concat, narrow, no_grad
from cicd.train import train_model

from reference import (claim_match_loops, co_interact_loops, decoder_loops,
                       difference_loops, kl_scalar, topk_brute)


def _report(name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"[{status}] {name}{suffix}")
    assert ok, f"{name}{suffix}"


def _micro_model(seed=11):
    cfg = config_from_dict(dict(d=8, d_h=4, p=4, l=6, k=2, o=4, n_classes=2,
                                label_names=["true", "false"], dropout=0.0))
    words = [f"w{i}" for i in range(9)]
    rng = np.random.default_rng(5)

    def text(n):
        return " ".join(rng.choice(words, size=n))

    corpus = [ClaimInstance("a", text(4), [text(6), text(5), text(3)], 0),
              ClaimInstance("b", text(3), [text(6), text(4)], 1)]
    vocab = build_vocab(corpus)
    model = DualViewModel.build(cfg, vocab, np.random.default_rng(seed))
    batch = encode_batch(corpus, vocab, cfg)
    return cfg, model, batch


def test_criterion_gradient_integrity():
    """Full-loss finite differences on the micro config, every parameter."""
    start = time.time()
    cfg, model, batch = _micro_model()

    def loss():
        pred = model.forward(batch.claim_ids[0], batch.claim_mask[0],
                             batch.article_ids[0], batch.article_mask[0],
                             int(batch.article_count[0]), int(batch.labels[0]))
        return pred.total

    points = [tensor for _, tensor in model.params.items()]
    err = grad_check(loss, points, h=1e-5)
    elapsed = time.time() - start
    _report("gradient integrity (full loss vs finite differences)",
            err < 1e-4 and elapsed < 60.0,
            f"max rel err {err:.3e}, {elapsed:.1f}s, "
            f"{model.params.n_values()} coords")


def test_criterion_attention_normalization_suite():
    """All attention distributions sum to 1 +- 1e-9 over 100 random configs."""
    rng = np.random.default_rng(99)
    worst = 0.0
    for trial in range(100):
        d_h = int(rng.integers(2, 7))
        tied = bool(rng.integers(0, 2))
        d = 2 * d_h if tied else int(rng.integers(3, 11))
        p = int(rng.integers(1, 7))
        l = int(rng.integers(3, 9))
        n_articles = int(rng.integers(1, 6))
        k = int(rng.integers(1, 4))
        n_classes = int(rng.integers(2, 5))
        cfg = config_from_dict(dict(
            d=d, d_h=d_h, p=p, l=l, k=k, o=2 * k, n_classes=n_classes,
            label_names=[f"c{i}" for i in range(n_classes)], dropout=0.0))
        words = [f"w{i}" for i in range(int(rng.integers(5, 12)))]

        def text(lo, hi):
            return " ".join(rng.choice(words, size=int(rng.integers(lo, hi + 1))))

        inst = ClaimInstance("x", text(1, p), [text(1, l) for _ in range(n_articles)],
                             int(rng.integers(0, n_classes)))
        vocab = build_vocab([inst])
        model = DualViewModel.build(cfg, vocab, np.random.default_rng(trial))
        batch = encode_batch([inst], vocab, cfg)
        params = model.params

        with no_grad():
            pred = model.forward(batch.claim_ids[0], batch.claim_mask[0],
                                 batch.article_ids[0], batch.article_mask[0],
                                 int(batch.article_count[0]),
                                 int(batch.labels[0]), collect_diag=True)

            # gamma and P_V per decoder step
            gamma_sums = pred.global_evidence.gamma.reshape(cfg.o, -1).sum(axis=1)
            pv_sums = pred.global_evidence.vocab_probs.sum(axis=1)
            # co-interaction weights
            co_sums = [w.sum() for w in pred.local_evidence.claim_attention]
            co_sums += [w.sum() for w in pred.local_evidence.article_attention]
            # columns of the similarity matrix
            col_sums = pred.local_evidence.selection.similarity.sum(axis=0)
            # word-claim matching attention rows
            n = int(batch.article_count[0])
            embs = [ced.embed_tokens(params, batch.article_ids[0][i], cfg)
                    for i in range(n)]
            claim_states = ced.encode_bilstm(batch.claim_ids[0], batch.claim_mask[0],
                                             params, "claim_enc", cfg)
            states = [ced.encode_bilstm(None, batch.article_mask[0][i], params,
                                        "article_enc", cfg, embedded=embs[i])
                      for i in range(n)]
            word_states = states[0] if n == 1 else concat(states, axis=0)
            _, match_w = ced.claim_match(word_states, claim_states,
                                         batch.claim_mask[0], params["match_w"])
            match_sums = match_w.data.sum(axis=1)

        for sums in (gamma_sums, pv_sums, np.asarray(co_sums), col_sums, match_sums):
            worst = max(worst, float(np.max(np.abs(np.asarray(sums) - 1.0))))
    _report("attention normalization suite (100 random configs)",
            worst < 1e-9, f"worst |sum-1| = {worst:.2e}")


def test_criterion_kl_properties():
    rng = np.random.default_rng(0)
    ok = True
    # identity
    x = Tensor(rng.normal(size=(1, 12)))
    ok &= abs(inconsistency_loss(x, Tensor(x.data.copy())).item()) <= 1e-9
    # nonnegativity
    for _ in range(200):
        g = Tensor(rng.normal(size=(1, 16)) * rng.uniform(0.1, 4))
        i = Tensor(rng.normal(size=(1, 16)) * rng.uniform(0.1, 4))
        ok &= inconsistency_loss(g, i).item() >= -1e-9
    # fixed 4-dim hand oracle
    g_dist = [0.4, 0.3, 0.2, 0.1]
    i_dist = [0.25, 0.25, 0.25, 0.25]
    got = inconsistency_loss(Tensor(np.log(g_dist)[None, :]),
                             Tensor(np.log(i_dist)[None, :])).item()
    oracle = kl_scalar(g_dist, i_dist, eps=EPS)
    ok &= abs(got - oracle) < 1e-12
    _report("KL properties (identity, nonnegativity, hand oracle)",
            ok, f"hand case |diff| = {abs(got - oracle):.2e}")


def test_criterion_selection_oracle_equivalence():
    start = time.time()
    rng = np.random.default_rng(17)
    checked = 0
    for trial in range(500):
        n = int(rng.integers(1, 9))
        if trial % 5 == 0 and n >= 2:
            # force exact ties by duplicating article rows
            base = rng.random(((n + 1) // 2, n))
            raw = np.vstack([base, base])[:n]
        else:
            raw = rng.random((n, n))
        a = raw / raw.sum(axis=0, keepdims=True)
        for k in (1, 2, 5):
            res = isi.select_topk(a, k)
            diff, chosen = topk_brute(a, k)
            assert res.chosen == chosen, (a, k)
            np.testing.assert_allclose(res.difference, diff, atol=1e-12)
            checked += 1
    elapsed = time.time() - start
    _report("selection oracle equivalence (500 random instances, N <= 8)",
            elapsed < 10.0, f"{checked} cases incl. ties, {elapsed:.2f}s")


def test_criterion_loop_oracle_equivalence():
    cfg, model, batch = _micro_model()
    params = model.params
    worst = 0.0
    with no_grad():
        n = int(batch.article_count[0])
        embs = [ced.embed_tokens(params, batch.article_ids[0][i], cfg)
                for i in range(n)]
        claim_states = ced.encode_bilstm(batch.claim_ids[0], batch.claim_mask[0],
                                         params, "claim_enc", cfg)
        art_mask = batch.article_mask[0][:n]
        # matching attention (claim aggregation per article word)
        states = [ced.encode_bilstm(None, art_mask[i], params, "article_enc",
                                    cfg, embedded=embs[i]) for i in range(n)]
        word_states = concat(states, axis=0)
        matched, _ = ced.claim_match(word_states, claim_states,
                                     batch.claim_mask[0], params["match_w"])
        oracle = claim_match_loops(word_states.data, claim_states.data,
                                   batch.claim_mask[0], params["match_w"].data)
        worst = max(worst, float(np.max(np.abs(matched.data - oracle))))

        # decoder recurrence and merged attention
        memory = ced.build_memory(embs, art_mask, claim_states,
                                  batch.claim_mask[0], params, cfg)
        ev = ced.decode_global(memory, params, cfg)
        pars = {name: params[name].data for name in (
            "decoder.wx", "decoder.wh", "decoder.b", "decoder.init_w",
            "decoder.init_b", "decoder.start", "word_score_w", "sent_score_w",
            "combine_w")}
        g, gamma = decoder_loops(memory.word_states.data, memory.word_mask,
                                 memory.sent_states.data, memory.sent_mask,
                                 pars, cfg.o)
        worst = max(worst, float(np.max(np.abs(ev.g.data - g))))
        worst = max(worst, float(np.max(np.abs(ev.gamma.reshape(cfg.o, -1) - gamma))))

        # inter-sentential similarity
        reps, _ = isi.sentence_reps(embs, art_mask, params, cfg)
        sim = isi.difference_matrix(reps, params)
        sim_oracle = difference_loops(reps.data, params["diff_row_w"].data,
                                      params["diff_row_b"].data,
                                      params["diff_col_w"].data,
                                      params["diff_col_b"].data)
        worst = max(worst, float(np.max(np.abs(sim.data - sim_oracle))))

        # co-interaction
        for i in range(n):
            rep = narrow(reps, 0, i, 1)
            frag, w_claim, w_art = isi.co_interact(rep, claim_states,
                                                   batch.claim_mask[0])
            frag_oracle, wc_oracle, wa_oracle = co_interact_loops(
                rep.data[0], claim_states.data, batch.claim_mask[0])
            worst = max(worst, float(np.max(np.abs(frag.data[0] - frag_oracle))))
            worst = max(worst, float(np.max(np.abs(w_claim - wc_oracle))))
            worst = max(worst, float(np.max(np.abs(w_art - wa_oracle))))
    _report("loop-oracle equivalence (matching, decoder, similarity, co-interaction)",
            worst < 1e-12, f"worst |diff| = {worst:.2e}")


@pytest.fixture(scope="module")
def desk_corpus():
    params = SyntheticParams(n_instances=250, n_classes=2, noise=0.1, seed=7)
    corpus, gold = gen_synthetic(params)
    return corpus[:200], corpus[200:250]


def test_criterion_desk_scale_learning(desk_corpus):
    train_set, dev_set = desk_corpus
    start = time.time()
    cfg = config_from_dict(dict(seed=7, early_stop_dev_f1=0.95), preset="synthetic")
    result = train_model(train_set, dev_set, cfg)
    elapsed = time.time() - start
    ok = (result.best_dev_micro_f1 >= 0.95 and len(result.trace) <= 30
          and elapsed < 300.0)
    _report("desk-scale learning (dev micF1 >= 0.95 within 30 epochs, < 5 min)",
            ok, f"micF1 {result.best_dev_micro_f1:.3f} at epoch "
                f"{result.best_epoch}, {elapsed:.0f}s")

    start = time.time()
    cfg0 = config_from_dict(dict(seed=7, alpha=0.0, early_stop_dev_f1=0.85),
                            preset="synthetic")
    result0 = train_model(train_set, dev_set, cfg0)
    elapsed0 = time.time() - start
    _report("desk-scale learning with alpha=0 (>= 0.85)",
            result0.best_dev_micro_f1 >= 0.85 and len(result0.trace) <= 30,
            f"micF1 {result0.best_dev_micro_f1:.3f}, {elapsed0:.0f}s")


def test_criterion_determinism(tmp_path, desk_corpus):
    train_set, dev_set = desk_corpus
    corpus_path = tmp_path / "corpus.jsonl"
    from cicd.data import save_jsonl
    save_jsonl(train_set[:40], corpus_path, ["class_0", "class_1"])
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({
        "d": 16, "d_h": 8, "l": 40, "p": 10, "k": 2, "o": 4, "n_classes": 2,
        "label_names": ["class_0", "class_1"], "batch_size": 8, "epochs": 2,
        "dropout": 0.2, "seed": 21}))
    outs = []
    for name in ("r1", "r2"):
        out = tmp_path / name
        assert main(["train", "--config", str(cfg_path), "--data", str(corpus_path),
                     "--out", str(out)]) == 0
        outs.append(out)
    trace_identical = ((outs[0] / "trace.jsonl").read_bytes()
                       == (outs[1] / "trace.jsonl").read_bytes())
    _report("determinism: identical config+seed give byte-identical traces",
            trace_identical)

    # checkpoint save -> load -> eval reproduces dev metrics exactly
    cfg = config_from_dict(dict(seed=7, epochs=2), preset="synthetic")
    result = train_model(train_set[:40], dev_set[:20], cfg)
    model = result.model
    dev_batch = encode_batch(dev_set[:20], model.vocab, model.cfg)
    before = evaluate(model, dev_batch)
    ckpt = tmp_path / "round.ckpt"
    save_checkpoint(ckpt, model.cfg, model.params, model.vocab.id_to_token)
    cfg2, state, tokens = load_checkpoint(ckpt)
    params2 = build_params(cfg2, np.random.default_rng(cfg2.seed))
    params2.load_state_dict(state)
    model2 = DualViewModel(cfg2, params2, Vocab(tokens[3:], min_freq=cfg2.min_freq))
    after = evaluate(model2, encode_batch(dev_set[:20], model2.vocab, model2.cfg))
    _report("determinism: checkpoint save/load/eval reproduces metrics exactly",
            before == after)


def test_criterion_ablation_structural_suite(desk_corpus):
    train_set, dev_set = desk_corpus
    small_train, small_dev = train_set[:40], dev_set[:10]

    base_cfg = config_from_dict(dict(seed=7, epochs=1), preset="synthetic")
    vocab = build_vocab(small_train)
    base_cfg.vocab_size = len(vocab)
    base_count = build_params(base_cfg, np.random.default_rng(0)).n_values()
    base_names = set(build_params(base_cfg, np.random.default_rng(0)).names())

    # toggle -> (expected parameter-count change, dropped parameter prefixes)
    param_changing = {
        "no_ced": ("article_enc", "decoder", "match_w", "word_score_w",
                   "sent_score_w", "combine_w", "vocab_b"),
        "no_isi": ("isi_enc", "diff_row_w", "diff_col_w"),
        "no_selection": ("diff_row_w", "diff_row_b", "diff_col_w", "diff_col_b"),
        "no_word_attention": ("word_score_w",),
        "no_sentence_attention": ("sent_score_w",),
    }
    all_ok = True
    details = []
    for toggle, dropped in param_changing.items():
        cfg = config_from_dict({toggle: True, "epochs": 1, "seed": 7},
                               preset="synthetic")
        result = train_model(small_train, small_dev, cfg)
        count = result.model.params.n_values()
        names = set(result.model.params.names())
        removed = base_names - names
        ok = (count < base_count
              and all(any(r.startswith(p) for r in removed) for p in dropped))
        all_ok &= ok
        details.append(f"{toggle}:{count}")

    # dataflow-only variants: same structure assertions on the forward pass
    batch_args = None
    for toggle, check in (
        ("no_interaction", lambda pred: pred.local_evidence.claim_attention == []),
        ("no_merge", lambda pred: abs(pred.global_evidence.gamma[0].sum() - 1) < 1e-9),
    ):
        cfg = config_from_dict({toggle: True, "epochs": 1, "seed": 7},
                               preset="synthetic")
        result = train_model(small_train, small_dev, cfg)
        model = result.model
        b = encode_batch(small_dev, model.vocab, model.cfg)
        pred = model.predict_batch(b, [0])[0]
        all_ok &= check(pred)
        details.append(f"{toggle}:ok")

    cfg = config_from_dict({"alpha": 0.0, "epochs": 1, "seed": 7},
                           preset="synthetic")
    result = train_model(small_train, small_dev, cfg)
    model = result.model
    b = encode_batch(small_dev, model.vocab, model.cfg)
    pred = model.predict_batch(b, [0])[0]
    all_ok &= pred.inconsistency is None
    details.append("alpha=0:ok")

    _report("ablation structural suite (-CED, -ISI, -selected I, -interaction I, "
            "-word., -sentence., -merge., alpha=0)", all_ok, " ".join(details))
