import numpy as np
import pytest
from hypothesis import given, strategies as st

from seqlm import autodiff as ad
from seqlm.data import Sentence, Token
from seqlm.errors import ConfigError, GraphIndexError, ShapeError, StateError
from seqlm.gradcheck import toy_model, toy_sentences, toy_vocabs
from seqlm.model import (LM_PARAMS, ModelDims, ModelParams, char_representation, combine_word_char,
                         encode_sentence, lm_losses, lstm_step, param_shapes, predict, run_lstm,
                         sentence_loss, softmax_label_loss, total_loss)


def dims(**kw):
    base = dict(vocab_size=7, char_vocab_size=5, n_labels=3, lm_vocab_size=5, embedding_dim=5,
                char_embedding_dim=3, char_hidden=2, hidden=4, combined_dim=4, lm_projection=3,
                output_mode="softmax", use_char=True)
    base.update(kw)
    return ModelDims(**base)


def zero_params(d):
    return ModelParams(d, {k: np.zeros(s) for k, s in param_shapes(d).items()})


def sent(ids, labels=None, lm=None, chars=None):
    labels = labels or [0] * len(ids)
    lm = lm or ids
    toks = tuple(Token(f"w{i}", f"w{i}", i, l, tuple(chars or (1,))) for i, l in zip(ids, lm))
    return Sentence(toks, tuple(labels))


def leaves(**arrays):
    return {k: ad.constant(np.asarray(v, dtype=float)) for k, v in arrays.items()}


# -- LSTM ---------------------------------------------------------------------

def test_lstm_step_zero():
    n = 3
    z = ad.constant(np.zeros(n))
    h, c = lstm_step(ad.constant(np.zeros(2)), z, z, ad.constant(np.zeros((4 * n, 2))),
                     ad.constant(np.zeros((4 * n, n))), ad.constant(np.zeros(4 * n)))
    assert np.all(h.value == 0) and np.all(c.value == 0)


def test_lstm_step_saturated_gates():
    b = np.array([50.0, -50.0, 50.0, 50.0])  # i, f, o, g
    h, c = lstm_step(ad.constant([0.3]), ad.constant([0.2]), ad.constant([5.0]),
                     ad.constant(np.zeros((4, 1))), ad.constant(np.zeros((4, 1))), ad.constant(b))
    assert c.value[0] == pytest.approx(1.0, abs=1e-12)
    assert h.value[0] == pytest.approx(np.tanh(1.0), abs=1e-12)
    assert h.value[0] == pytest.approx(0.7616, abs=1e-4)


def test_lstm_step_shape_error():
    with pytest.raises(ShapeError):
        lstm_step(ad.constant(np.zeros(2)), ad.constant(np.zeros(3)), ad.constant(np.zeros(3)),
                  ad.constant(np.zeros((12, 3))), ad.constant(np.zeros((12, 3))), ad.constant(np.zeros(12)))


def test_lstm_step_gradients(rng):
    n, e = 3, 2
    Wx, U, b = (ad.leaf(rng.normal(size=s)) for s in ((4 * n, e), (4 * n, n), (4 * n,)))
    x, h0, c0 = (ad.leaf(rng.normal(size=s)) for s in ((e,), (n,), (n,)))
    w = ad.constant(rng.normal(size=n))

    def build():
        h, c = lstm_step(x, h0, c0, Wx, U, b)
        return ad.add(ad.total(ad.multiply(h, w)), ad.total(c))

    assert ad.grad_check(build, [Wx, U, b, x, h0, c0]) < 1e-4


def test_run_lstm_matches_stepwise(rng):
    n, e = 4, 3
    Wx, U, b = (ad.constant(rng.normal(size=s)) for s in ((4 * n, e), (4 * n, n), (4 * n,)))
    xs = [ad.constant(rng.normal(size=e)) for _ in range(5)]
    h, c = ad.constant(np.zeros(n)), ad.constant(np.zeros(n))
    for x, fast in zip(xs, run_lstm(xs, Wx, U, b, n)):
        h, c = lstm_step(x, h, c, Wx, U, b)
        np.testing.assert_allclose(fast.value, h.value, rtol=0, atol=1e-14)


# -- character component -------------------------------------------------------

def _char_P(rng, d, zero=False):
    params = zero_params(d) if zero else ModelParams.initialize(d, rng)
    return params.nodes(requires_grad=False)


def test_char_zero_params_give_zero():
    d = dims()
    out = char_representation([1, 2, 3], _char_P(None, d, zero=True), d.char_hidden)
    assert np.all(out.value == 0)


def test_char_single_character_uses_first_step(rng):
    d = dims()
    P = _char_P(rng, d)
    x = ad.row_lookup(P["char_emb"], 2)
    fw = run_lstm([x], P["char_fw_Wx"], P["char_fw_U"], P["char_fw_b"], d.char_hidden)[0]
    bw = run_lstm([x], P["char_bw_Wx"], P["char_bw_U"], P["char_bw_b"], d.char_hidden)[0]
    expected = np.tanh(P["char_proj_W"].value @ np.concatenate([fw.value, bw.value]) + P["char_proj_b"].value)
    np.testing.assert_allclose(char_representation([2], P, d.char_hidden).value, expected, atol=1e-15)


def test_char_reversal_swaps_directions(rng):
    d = dims()
    P = _char_P(rng, d)
    for name in ("Wx", "U", "b"):
        P[f"char_bw_{name}"] = P[f"char_fw_{name}"]
    # with shared weights, the backward state of a word is the forward state of its reverse
    P["char_proj_W"] = ad.constant(np.eye(d.embedding_dim, 2 * d.char_hidden))
    P["char_proj_b"] = ad.constant(np.zeros(d.embedding_dim))
    hc = d.char_hidden
    a = char_representation([1, 2, 4], P, hc).value
    b = char_representation([4, 2, 1], P, hc).value
    np.testing.assert_array_equal(a[:hc], b[hc:2 * hc])
    np.testing.assert_array_equal(a[hc:2 * hc], b[:hc])


def test_char_empty_is_error(rng):
    from seqlm.errors import InvalidTokenError
    with pytest.raises(InvalidTokenError):
        char_representation([], _char_P(rng, dims()), 2)


# -- word/char gate ------------------------------------------------------------

def _gate_P(rng, e, bias=0.0):
    return leaves(gate_W1=rng.normal(size=(e, e)), gate_W2=rng.normal(size=(e, e)), gate_b1=rng.normal(size=e),
                  gate_W3=rng.normal(size=(e, e)), gate_b3=np.full(e, bias))


def test_gate_equal_inputs(rng):
    v = rng.normal(size=4)
    out = combine_word_char(ad.constant(v), ad.constant(v), _gate_P(rng, 4)).value
    np.testing.assert_allclose(out, v, rtol=1e-15)


def test_gate_saturated_selects_word(rng):
    xw, xc = rng.normal(size=4), rng.normal(size=4)
    P = _gate_P(rng, 4, bias=60.0)
    P["gate_W3"] = ad.constant(np.zeros((4, 4)))
    np.testing.assert_allclose(combine_word_char(ad.constant(xw), ad.constant(xc), P).value, xw, atol=1e-12)


@given(st.integers(0, 10 ** 6))
def test_gate_output_between_inputs(seed):
    r = np.random.default_rng(seed)
    xw, xc = r.normal(size=5), r.normal(size=5)
    out = combine_word_char(ad.constant(xw), ad.constant(xc), _gate_P(r, 5)).value
    assert np.all(out >= np.minimum(xw, xc) - 1e-12) and np.all(out <= np.maximum(xw, xc) + 1e-12)


def test_gate_shape_error(rng):
    with pytest.raises(ShapeError):
        combine_word_char(ad.constant(np.zeros(4)), ad.constant(np.zeros(3)), _gate_P(rng, 4))


# -- encoder and losses ----------------------------------------------------------

def test_unencoded_sentence_is_state_error():
    params = toy_model("softmax")
    s = Sentence((Token("a", "a"),), (0,))
    with pytest.raises(StateError):
        encode_sentence(s, params.nodes(False), params.dims)


def test_single_token_has_no_lm_loss():
    params = toy_model("crf")
    first = toy_sentences(toy_vocabs())[0]
    one = Sentence(first.tokens[:1], first.labels[:1])
    g = sentence_loss(one, params.nodes(False), params.dims, 0.1, "eval")
    assert float(g.fw_E.value) == 0.0 and float(g.bw_E.value) == 0.0
    assert float(g.total.value) == float(g.E.value)


def test_causality_by_perturbation():
    params = toy_model("softmax")
    P = params.nodes(False)
    base = [1, 2, 3, 4, 5]
    ref = encode_sentence(sent(base), P, params.dims, "eval", 0.5)
    for t in range(len(base)):
        changed = list(base)
        changed[t] = 6
        g = encode_sentence(sent(changed), P, params.dims, "eval", 0.5)
        for u in range(t):
            assert np.array_equal(g.fw_m[u].value, ref.fw_m[u].value)
            assert np.array_equal(g.fw_h[u].value, ref.fw_h[u].value)
        for u in range(t + 1, len(base)):
            assert np.array_equal(g.bw_m[u].value, ref.bw_m[u].value)
        assert not np.array_equal(g.d[t].value, ref.d[t].value)


def test_softmax_loss_uniform():
    d = [ad.constant(np.zeros(4))] * 3
    E = softmax_label_loss(d, [0, 1, 1], ad.constant(np.zeros((2, 4))))
    assert float(E.value) == pytest.approx(3 * np.log(2), abs=1e-14)


def test_softmax_loss_margin():
    W = ad.constant(np.array([[40.0], [-40.0]]))
    assert float(softmax_label_loss([ad.constant([1.0])] * 2, [0, 0], W).value) < 1e-30


def test_softmax_loss_gradient_on_logits(rng):
    W = ad.leaf(np.eye(3))
    ds = [ad.constant(rng.normal(size=3)) for _ in range(2)]
    ad.backward(softmax_label_loss(ds, [2, 0], W))
    # dE/dlogits_t = softmax - onehot, and W = I so dE/dW = sum_t (p_t - y_t) d_t^T
    expected = np.zeros((3, 3))
    for dt, y in zip(ds, [2, 0]):
        p = np.exp(dt.value) / np.exp(dt.value).sum()
        expected += np.outer(p - np.eye(3)[y], dt.value)
    np.testing.assert_allclose(W.grad, expected, atol=1e-14)


def test_softmax_loss_bad_label():
    with pytest.raises(GraphIndexError):
        softmax_label_loss([ad.constant(np.zeros(2))], [5], ad.constant(np.zeros((2, 2))))


def _lm_P(V, m=2):
    P = leaves(lm_fw_Wq=np.zeros((V, m)), lm_fw_bq=np.zeros(V), lm_bw_Wq=np.zeros((V, m)), lm_bw_bq=np.zeros(V))
    return P


def test_lm_losses_uniform_two_tokens():
    from seqlm.model import SentenceGraph
    g = SentenceGraph(fw_m=[ad.constant(np.zeros(2))] * 2, bw_m=[ad.constant(np.zeros(2))] * 2)
    fw, bw = lm_losses(g, [1, 2], _lm_P(3))
    assert float(fw.value) == pytest.approx(np.log(3)) and float(bw.value) == pytest.approx(np.log(3))


def test_lm_targets_are_neighbours():
    # heads put all mass on the word at their own position; loss is then
    # large unless targets are the neighbouring words
    from seqlm.model import SentenceGraph
    V = 4
    ids = [1, 2, 3]
    ms = [ad.constant(np.eye(V)[i]) for i in ids]
    P = leaves(lm_fw_Wq=50 * np.eye(V), lm_fw_bq=np.zeros(V), lm_bw_Wq=50 * np.eye(V), lm_bw_bq=np.zeros(V))
    fw, bw = lm_losses(SentenceGraph(fw_m=ms, bw_m=ms), ids, P)
    assert float(fw.value) == pytest.approx(2 * 50, rel=1e-9)
    assert float(bw.value) == pytest.approx(2 * 50, rel=1e-9)
    # with the heads shifted to predict the neighbours the loss vanishes
    fw_ms = [ad.constant(np.eye(V)[i]) for i in ids[1:]] + [ad.constant(np.zeros(V))]
    bw_ms = [ad.constant(np.zeros(V))] + [ad.constant(np.eye(V)[i]) for i in ids[:-1]]
    fw, bw = lm_losses(SentenceGraph(fw_m=fw_ms, bw_m=bw_ms), ids, P)
    assert float(fw.value) < 1e-20 and float(bw.value) < 1e-20


def test_total_loss():
    E, f, b = ad.constant(2.0), ad.constant(3.0), ad.constant(5.0)
    assert float(total_loss(E, f, b, 0.1).value) == pytest.approx(2.8, abs=1e-15)
    assert float(total_loss(E, f, b, 0.0).value) == 2.0
    with pytest.raises(ConfigError):
        total_loss(E, f, b, -0.1)


@given(st.floats(0, 10), st.floats(-5, 5), st.floats(0, 20), st.floats(0, 20))
def test_total_loss_linear_in_gamma(gamma, e, f, b):
    E, F, B = ad.constant(e), ad.constant(f), ad.constant(b)
    diff = float(total_loss(E, F, B, gamma).value) - float(total_loss(E, F, B, 0.0).value)
    assert diff == pytest.approx(gamma * (f + b), rel=1e-12, abs=1e-12)


def test_gamma_zero_full_model_equals_label_loss():
    params = toy_model("crf")
    P = params.nodes(False)
    for s in toy_sentences(toy_vocabs()):
        g0 = sentence_loss(s, P, params.dims, 0.0, "eval", with_lm=True)
        assert float(g0.total.value) == float(g0.E.value)
        g = sentence_loss(s, P, params.dims, 0.1, "eval")
        assert float(g.total.value) == pytest.approx(
            float(g.E.value) + 0.1 * (float(g.fw_E.value) + float(g.bw_E.value)), rel=1e-15)


def test_predict_softmax_argmax():
    d = dims(n_labels=2, use_char=False)
    params = zero_params(d)
    params["out_b"][:] = [1.0, -1.0]
    assert predict(sent([1, 2]), params) == [0, 0]
    params["out_b"][:] = [-1.0, 1.0]
    assert predict(sent([1, 2]), params) == [1, 1]


def test_predict_never_reads_lm_params():
    for mode in ("softmax", "crf"):
        params = toy_model(mode)
        with ad.count_ops() as counter:
            for s in toy_sentences(toy_vocabs()):
                predict(s, params, 0.5)
        assert not set(counter.params_read) & set(LM_PARAMS)
        assert "out_W" in counter.params_read


def test_params_validate_shapes():
    d = dims()
    arrays = {k: np.zeros(s) for k, s in param_shapes(d).items()}
    arrays["fw_U"] = np.zeros((3, 3))
    with pytest.raises(ShapeError):
        ModelParams(d, arrays)


def test_initialization(rng):
    params = ModelParams.initialize(dims(output_mode="crf"), rng)
    h, hc = params.dims.hidden, params.dims.char_hidden
    assert np.all(params["fw_b"][h:2 * h] == 1.0) and np.all(params["fw_b"][:h] == 0)
    assert np.all(params["char_bw_b"][hc:2 * hc] == 1.0)
    assert np.all(params["crf_A"] == 0)
    assert np.abs(params["word_emb"]).max() <= 0.05 and np.abs(params["lm_fw_Wq"]).max() <= 0.05
    assert params.all_finite()
