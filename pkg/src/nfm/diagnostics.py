"""Finite-difference verification of every op, layer, and loss on toy dims.

Used by the ``gradcheck`` CLI command and the test suite.  Each component
is reduced to a scalar through a fixed random weighting, then its backprop
gradient is compared elementwise against central differences.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, grad_check
from .layers import NFM, ModelConfig, complex_linear, instance_norm
from .tasks import TaskSpec, anomaly_loss, cross_entropy, forecast_loss
from .train import base_factors, batch_loss

GRADCHECK_TOL = 1e-4


def toy_model_config(task_kind: str = "forecast", dropout: float = 0.0) -> ModelConfig:
    head, d_y = ("classify", 3) if task_kind == "classify" else ("pointwise", 1)
    return ModelConfig(c=1, d=4, n_blocks=1, h0=4, w0=3.0, ff_scale=4.0, dropout=dropout,
                       proj_width=4, mlp_hidden=4, inr_hidden=4, head=head, d_y=d_y)


def _leaf(rng, *shape) -> Tensor:
    return Tensor(rng.normal(size=shape), requires_grad=True)


def _scalarize(out: Tensor, weights: np.ndarray) -> Tensor:
    return ad.mean(ad.mul(out, Tensor(weights)))


def op_gradchecks(seed: int = 0, h: float = 1e-5) -> dict[str, float]:
    """grad_check every primitive op on random tensors of <= 64 elements."""
    rng = np.random.default_rng(seed)
    results: dict[str, float] = {}

    def check(name, params, build):
        results[name] = grad_check(build, params, h=h)

    a = _leaf(rng, 4, 6)
    b = _leaf(rng, 4, 6)
    w46 = rng.normal(size=(4, 6))
    check("op.add", [a, b], lambda: _scalarize(ad.add(a, b), w46))
    check("op.sub", [a, b], lambda: _scalarize(ad.sub(a, b), w46))
    check("op.mul", [a, b], lambda: _scalarize(ad.mul(a, b), w46))
    check("op.scale", [a], lambda: _scalarize(ad.scale(a, -1.7), w46))

    m = _leaf(rng, 3, 5)
    w = _leaf(rng, 5, 4)
    w34 = rng.normal(size=(3, 4))
    check("op.matmul", [m, w], lambda: _scalarize(ad.matmul(m, w), w34))
    bias = _leaf(rng, 4)
    check("op.affine", [m, w, bias], lambda: _scalarize(ad.affine(m, w, bias), w34))

    cu = _leaf(rng, 2, 3, 4, 2)
    cwr, cwi = _leaf(rng, 4, 4), _leaf(rng, 4, 4)
    cbr, cbi = _leaf(rng, 4), _leaf(rng, 4)
    w2342 = rng.normal(size=(2, 3, 4, 2))
    check("op.complex_affine", [cu, cwr, cwi, cbr, cbi],
          lambda: _scalarize(ad.complex_affine(cu, cwr, cwi, cbr, cbi), w2342))

    nz = _leaf(rng, 3, 7, 2)
    w372 = rng.normal(size=(3, 7, 2))
    check("op.normalize", [nz], lambda: _scalarize(ad.normalize(nz, axis=1, eps=1e-5), w372))

    check("op.sin", [a], lambda: _scalarize(ad.sin(a), w46))
    check("op.cos", [a], lambda: _scalarize(ad.cos(a), w46))
    # keep relu away from the kink so central differences are valid
    r = Tensor(np.where(np.abs(a.data) < 0.05, 0.5, a.data), requires_grad=True)
    check("op.relu", [r], lambda: _scalarize(ad.relu(r), w46))
    p = Tensor(np.abs(rng.normal(size=(4, 6))) + 0.5, requires_grad=True)
    check("op.powc", [p], lambda: _scalarize(ad.powc(p, -0.5), w46))
    check("op.sqrt", [p], lambda: _scalarize(ad.sqrt(p), w46))

    w6 = rng.normal(size=6)
    check("op.mean", [a], lambda: _scalarize(ad.mean(a, axis=0), w6))
    w6v = rng.normal(size=6)
    check("op.variance", [a], lambda: _scalarize(ad.variance(a, axis=0), w6v))

    logits = _leaf(rng, 5, 3)
    labels = rng.integers(0, 3, size=5)
    check("op.softmax_cross_entropy", [logits], lambda: cross_entropy(logits, labels))

    d = _leaf(rng, 6, 4)
    w64 = rng.normal(size=(6, 4))
    check("op.dropout", [d],
          lambda: _scalarize(ad.dropout(d, 0.3, np.random.default_rng(seed + 1)), w64))

    c1 = _leaf(rng, 3, 2)
    c2 = _leaf(rng, 3, 4)
    w36 = rng.normal(size=(3, 6))
    check("op.concat", [c1, c2], lambda: _scalarize(ad.concat([c1, c2], axis=1), w36))
    w26 = rng.normal(size=(2, 6))
    check("op.slice", [a], lambda: _scalarize(ad.slice_(a, (slice(1, 3), slice(None))), w26))
    w64r = rng.normal(size=(6, 4))
    check("op.reshape", [a], lambda: _scalarize(ad.reshape(a, (6, 4)), w64r))
    s1 = _leaf(rng, 3, 2)
    s2 = _leaf(rng, 3, 2)
    w322 = rng.normal(size=(3, 2, 2))
    check("op.stack_last", [s1, s2], lambda: _scalarize(ad.stack_last(s1, s2), w322))

    za = _leaf(rng, 3, 4, 2)
    zb = _leaf(rng, 3, 4, 2)
    w342 = rng.normal(size=(3, 4, 2))
    check("op.complex_mul", [za, zb], lambda: _scalarize(ad.complex_mul(za, zb), w342))

    x = _leaf(rng, 2, 8, 3)
    wk = rng.normal(size=(2, 5, 3, 2))
    check("op.rfft", [x], lambda: _scalarize(ad.rfft_pair(x, axis=1), wk))
    xs = _leaf(rng, 2, 5, 3, 2)
    wt = rng.normal(size=(2, 8, 3))
    check("op.irfft", [xs], lambda: _scalarize(ad.irfft_pair(xs, n=8, axis=1), wt))
    idx = np.array([0, 2, 4, 6, 7])
    we = rng.normal(size=(2, 9, 3, 2))
    check("op.spectral_extend", [xs],
          lambda: _scalarize(ad.spectral_extend(xs, idx, 2.0, 9, axis=1), we))
    return results


def _jitter(model: NFM, rng, sigma: float = 0.05):
    """Move all params to a generic point: zero-init biases would otherwise
    leave ReLU preactivations sitting exactly on the kink (the DC bins of
    instance-normalized signals are exactly zero)."""
    for p in model.parameters():
        p.data = p.data + rng.normal(scale=sigma, size=p.data.shape)


def layer_gradchecks(seed: int = 0, h: float = 1e-5) -> dict[str, float]:
    """grad_check each model layer on a toy config (well under 5k params)."""
    rng = np.random.default_rng(seed)
    results: dict[str, float] = {}
    cfg = toy_model_config()
    model = NFM(cfg, seed=seed)
    _jitter(model, rng)
    assert model.n_params() < 5000, "gradcheck layers must stay toy-sized"
    n, horizon = 12, 4
    task = TaskSpec(kind="forecast", horizon=horizon)
    factors = task.factors(n)
    length = factors.output_length(n)
    x = Tensor(rng.normal(size=(2, n, 1)), requires_grad=True)

    def params_of(prefix):
        return [v for k, v in model.params.items() if k.startswith(prefix)]

    w_proj = rng.normal(size=(2, n, cfg.d))
    results["layer.input_projection"] = grad_check(
        lambda: _scalarize(model.input_projection(x, False, None), w_proj),
        params_of("proj.") + [x], h=h)

    v = _leaf(rng, 2, 6, 3)
    w_in = rng.normal(size=(2, 6, 3))
    results["layer.instance_norm"] = grad_check(
        lambda: _scalarize(instance_norm(v), w_in), [v], h=h)

    w_tok = rng.normal(size=(length, cfg.d))
    from .inr import siren_forward
    results["layer.siren"] = grad_check(
        lambda: _scalarize(siren_forward(model._sub("lft.inr"),
                                         model._features("lft", length), cfg.w0), w_tok),
        params_of("lft.inr"), h=h)

    xb = _leaf(rng, 2, n, cfg.d)
    w_lft = rng.normal(size=(2, length, cfg.d))
    results["layer.lft_block"] = grad_check(
        lambda: _scalarize(model.lft_block(xb, factors).z0, w_lft),
        params_of("lft.") + [xb], h=h)

    state = model.lft_block(Tensor(rng.normal(size=(2, n, cfg.d))), factors)
    state.z0 = Tensor(state.z0.data)          # freeze the embedding as a constant
    state.z0_freq = Tensor(state.z0_freq.data)
    z = _leaf(rng, 2, length, cfg.d)
    w_mix = rng.normal(size=(2, length, cfg.d))
    results["layer.inff"] = grad_check(
        lambda: _scalarize(model.inff(z, state, 0), w_mix),
        params_of("block0.inff") + [z], h=h)

    results["layer.channel_mlp"] = grad_check(
        lambda: _scalarize(model.channel_mlp(z, "block0.mlp", False, None), w_mix),
        params_of("block0.mlp") + [z], h=h)

    results["layer.mixer_block"] = grad_check(
        lambda: _scalarize(model.mixer_block(z, state, 0, False, None), w_mix),
        params_of("block0.") + [z], h=h)

    cplx = _leaf(rng, 2, 5, cfg.d, 2)
    w_cplx = rng.normal(size=(2, 5, cfg.d, 2))
    sub = model._sub("block0.inff")
    results["layer.complex_linear"] = grad_check(
        lambda: _scalarize(complex_linear(cplx, sub["fc1.wr"], sub["fc1.wi"],
                                          sub["fc1.br"], sub["fc1.bi"]), w_cplx),
        [sub["fc1.wr"], sub["fc1.wi"], sub["fc1.br"], sub["fc1.bi"], cplx], h=h)

    w_bb = rng.normal(size=(2, length, cfg.d))
    results["layer.backbone"] = grad_check(
        lambda: _scalarize(model.backbone(x, factors)[0], w_bb),
        model.parameters() + [x], h=h)
    return results


def loss_gradchecks(seed: int = 0, h: float = 1e-5) -> dict[str, float]:
    """grad_check both composite losses and the classification loss, end to end."""
    rng = np.random.default_rng(seed)
    results: dict[str, float] = {}
    n, horizon = 12, 4

    fc_model = NFM(toy_model_config("forecast"), seed=seed)
    _jitter(fc_model, rng)
    fc_task = TaskSpec(kind="forecast", horizon=horizon, norm_mode="mean-only")
    window = rng.normal(size=(2, n + horizon, 1))
    data = {"n_input": n, "kind": "forecast"}
    results["loss.forecast"] = grad_check(
        lambda: batch_loss(fc_model, fc_task, window, base_factors(fc_task, data),
                           False, None)[0],
        fc_model.parameters(), h=h)

    ad_model = NFM(toy_model_config("anomaly"), seed=seed + 1)
    _jitter(ad_model, rng)
    ad_task = TaskSpec(kind="anomaly", dr=2, norm_mode="mean-only")
    window = rng.normal(size=(2, n, 1))
    data = {"n_input": n, "kind": "anomaly"}
    results["loss.anomaly"] = grad_check(
        lambda: batch_loss(ad_model, ad_task, window, base_factors(ad_task, data),
                           False, None)[0],
        ad_model.parameters(), h=h)

    cl_model = NFM(toy_model_config("classify"), seed=seed + 2)
    _jitter(cl_model, rng)
    cl_task = TaskSpec(kind="classify", n_classes=3)
    x = rng.normal(size=(4, n, 1))
    labels = rng.integers(0, 3, size=4)
    data = {"n_input": n, "kind": "classify"}
    results["loss.classify"] = grad_check(
        lambda: batch_loss(cl_model, cl_task, (x, labels), base_factors(cl_task, data),
                           False, None)[0],
        cl_model.parameters(), h=h)

    # dropout path stays differentiable when each rebuild reuses the same seed
    dp_model = NFM(toy_model_config("forecast", dropout=0.2), seed=seed + 3)
    _jitter(dp_model, rng)
    dp_window = rng.normal(size=(2, n + horizon, 1))
    results["loss.forecast_dropout"] = grad_check(
        lambda: batch_loss(dp_model, fc_task, dp_window,
                           base_factors(fc_task, {"n_input": n, "kind": "forecast"}), True,
                           np.random.default_rng(seed + 7))[0],
        dp_model.parameters(), h=h)
    return results


def component_gradchecks(seed: int = 0, h: float = 1e-5) -> dict[str, float]:
    out = {}
    out.update(op_gradchecks(seed, h))
    out.update(layer_gradchecks(seed, h))
    out.update(loss_gradchecks(seed, h))
    return out
