"""Part-attention contact head with exact analytic gradients, in plain numpy.

A small stack of 3x3 convolutions produces shared features. An attention
branch classifies every pixel into 17 parts + background; its channel-wise
softmax gates the shared features separately per part, each gated copy goes
through a part-specific 3x3 convolution, and the concatenation feeds a 1x1
contact classifier. Training minimizes a weighted sum of two per-pixel
cross-entropies (attention vs. part labels, contact vs. contact labels) with
the background class down-weighted.

Everything is stride-1, same-padding, float64, and deterministic, so analytic
gradients can be verified against central finite differences to tight
tolerances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .maps import ContactMap
from .parts import NUM_PARTS

# Loss schedule: the attention term is active only for the first epochs.
LAMBDA_A_INITIAL = 0.1
LAMBDA_A_EPOCHS = 10
LAMBDA_C = 1.0
BACKGROUND_WEIGHT = 0.02
DEFAULT_BASE_LR = 0.02
POLY_DECAY_POWER = 0.9


class TrainingDiverged(RuntimeError):
    def __init__(self, iteration: int, loss_value: float):
        super().__init__(f"loss became non-finite ({loss_value}) at iteration {iteration}")
        self.iteration = iteration


@dataclass(frozen=True)
class HeadConfig:
    """Desk-scale architecture knobs (the full-scale reference uses C=512)."""

    in_channels: int = 1
    channels: int = 8        # C: shared feature channels
    part_channels: int = 4   # C': per-part conv output channels
    att_channels: int = 8    # attention branch hidden width
    stub_layers: int = 2     # 3x3 conv + ReLU layers in the feature stub
    num_parts: int = NUM_PARTS
    norm: str = "none"       # "none" | "affine" (per-channel gain/bias stand-in for batch norm)

    def __post_init__(self):
        if self.stub_layers < 1:
            raise ValueError("need at least one stub layer")
        if self.norm not in ("none", "affine"):
            raise ValueError(f"unknown norm mode {self.norm!r}")
        for name in ("in_channels", "channels", "part_channels", "att_channels"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    @property
    def num_classes(self) -> int:
        return self.num_parts + 1

    @property
    def concat_channels(self) -> int:
        return self.part_channels * self.num_classes


@dataclass
class HeadParams:
    """All learnable arrays; doubles as the gradient container."""

    config: HeadConfig
    stub_w: list[np.ndarray]
    stub_b: list[np.ndarray]
    att_w: np.ndarray
    att_b: np.ndarray
    att_cls_w: np.ndarray
    att_cls_b: np.ndarray
    part_w: np.ndarray
    part_b: np.ndarray
    out_w: np.ndarray
    out_b: np.ndarray
    norm_gain: np.ndarray | None = None
    norm_bias: np.ndarray | None = None

    def named_arrays(self):
        """(name, array) pairs in a fixed serialization order."""
        for i, (w, b) in enumerate(zip(self.stub_w, self.stub_b)):
            yield f"stub_w_{i}", w
            yield f"stub_b_{i}", b
        yield "att_w", self.att_w
        yield "att_b", self.att_b
        yield "att_cls_w", self.att_cls_w
        yield "att_cls_b", self.att_cls_b
        yield "part_w", self.part_w
        yield "part_b", self.part_b
        yield "out_w", self.out_w
        yield "out_b", self.out_b
        if self.norm_gain is not None:
            yield "norm_gain", self.norm_gain
            yield "norm_bias", self.norm_bias

    def replace_arrays(self, arrays: dict[str, np.ndarray]) -> "HeadParams":
        n_stub = len(self.stub_w)
        return HeadParams(
            config=self.config,
            stub_w=[arrays[f"stub_w_{i}"] for i in range(n_stub)],
            stub_b=[arrays[f"stub_b_{i}"] for i in range(n_stub)],
            att_w=arrays["att_w"],
            att_b=arrays["att_b"],
            att_cls_w=arrays["att_cls_w"],
            att_cls_b=arrays["att_cls_b"],
            part_w=arrays["part_w"],
            part_b=arrays["part_b"],
            out_w=arrays["out_w"],
            out_b=arrays["out_b"],
            norm_gain=arrays.get("norm_gain"),
            norm_bias=arrays.get("norm_bias"),
        )

    def num_parameters(self) -> int:
        return sum(a.size for _, a in self.named_arrays())


def init_params(config: HeadConfig = HeadConfig(),
                seed: "int | np.random.SeedSequence" = 0) -> HeadParams:
    """Uniform init in +-1/sqrt(fan_in), reproducible from the seed."""
    rng = np.random.default_rng(seed)

    def draw(shape, fan_in):
        bound = 1.0 / math.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    c = config
    stub_w, stub_b = [], []
    cin = c.in_channels
    for _ in range(c.stub_layers):
        fan = 9 * cin
        stub_w.append(draw((3, 3, cin, c.channels), fan))
        stub_b.append(draw((c.channels,), fan))
        cin = c.channels

    fan = 9 * c.channels
    att_w = draw((3, 3, c.channels, c.att_channels), fan)
    att_b = draw((c.att_channels,), fan)
    fan = c.att_channels
    att_cls_w = draw((1, 1, c.att_channels, c.num_classes), fan)
    att_cls_b = draw((c.num_classes,), fan)

    fan = 9 * c.channels
    part_w = draw((c.num_classes, 3, 3, c.channels, c.part_channels), fan)
    part_b = draw((c.num_classes, c.part_channels), fan)

    fan = c.concat_channels
    out_w = draw((1, 1, c.concat_channels, c.num_classes), fan)
    out_b = draw((c.num_classes,), fan)

    norm_gain = norm_bias = None
    if c.norm == "affine":
        # uniform attention gates features by 1/(J+1); start the per-channel
        # gain at J+1 so the concatenated features enter the classifier at
        # unit scale, which is the job batch norm does in the full model
        norm_gain = np.full(c.concat_channels, float(c.num_classes))
        norm_bias = np.zeros(c.concat_channels)

    return HeadParams(c, stub_w, stub_b, att_w, att_b, att_cls_w, att_cls_b,
                      part_w, part_b, out_w, out_b, norm_gain, norm_bias)


# ---------------------------------------------------------------------------
# Convolution primitives (stride 1, same zero padding, odd kernels).
# im2col + matmul keeps per-call overhead low enough for finite-difference
# sweeps over every parameter.

def _im2col(x: np.ndarray, kh: int, kw: int) -> np.ndarray:
    """(N,H,W,C) -> (N,H,W,C*kh*kw) patch matrix, channel-major within a patch."""
    ph, pw = kh // 2, kw // 2
    if ph or pw:
        pad = [(0, 0)] * x.ndim
        pad[1], pad[2] = (ph, ph), (pw, pw)
        x = np.pad(x, pad)
    win = sliding_window_view(x, (kh, kw), axis=(1, 2))  # (..., C, kh, kw)
    return win.reshape(*win.shape[:-3], -1)


def _kernel_matrix(w: np.ndarray) -> np.ndarray:
    """(kh,kw,Cin,Cout) -> (Cin*kh*kw, Cout) matching the _im2col layout."""
    kh, kw, cin, cout = w.shape
    return w.transpose(2, 0, 1, 3).reshape(cin * kh * kw, cout)


def conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """x (N,H,W,Cin) * w (kh,kw,Cin,Cout) -> (N,H,W,Cout)."""
    if x.shape[-1] != w.shape[2]:
        raise ValueError(f"channel mismatch: input {x.shape[-1]}, kernel {w.shape[2]}")
    if w.shape[0] == 1 and w.shape[1] == 1:
        y = x @ w[0, 0]
    else:
        y = _im2col(x, w.shape[0], w.shape[1]) @ _kernel_matrix(w)
    if b is not None:
        y = y + b
    return y


def conv2d_input_grad(dy: np.ndarray, w: np.ndarray) -> np.ndarray:
    w_ft = w[::-1, ::-1].transpose(0, 1, 3, 2)
    return conv2d(dy, w_ft)


def conv2d_param_grad(x: np.ndarray, dy: np.ndarray, kh: int, kw: int):
    cin = x.shape[-1]
    cout = dy.shape[-1]
    col = _im2col(x, kh, kw).reshape(-1, cin * kh * kw)
    dw = (col.T @ dy.reshape(-1, cout)).reshape(cin, kh, kw, cout).transpose(1, 2, 0, 3)
    return dw, dy.sum(axis=(0, 1, 2))


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


# ---------------------------------------------------------------------------
# Core operations.

def _softmax_stable(x: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        shifted = x - x.max(axis=-1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=-1, keepdims=True)


def softmax_channels(logits: np.ndarray) -> np.ndarray:
    """Exp-normalize over the trailing (class) axis, max-subtracted for stability."""
    x = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("attention logits contain non-finite values")
    return _softmax_stable(x)


def _softmax_backward(attn: np.ndarray, dattn: np.ndarray) -> np.ndarray:
    return attn * (dattn - (dattn * attn).sum(axis=-1, keepdims=True))


def _group_cols(x: np.ndarray, kh: int, kw: int) -> np.ndarray:
    """(N,H,W,J,C) -> (J, N*H*W, C*kh*kw) per-group patch matrices."""
    n, h, w, j, c = x.shape
    ph, pw = kh // 2, kw // 2
    xp = np.pad(x, ((0, 0), (ph, ph), (pw, pw), (0, 0), (0, 0)))
    win = sliding_window_view(xp, (kh, kw), axis=(1, 2))  # (N,H,W,J,C,kh,kw)
    return win.transpose(3, 0, 1, 2, 4, 5, 6).reshape(j, n * h * w, c * kh * kw)


def _part_attend_batched(feat, attn, part_w, part_b):
    """Gate features per part and convolve: (N,H,W,J+1,C') plus the gated input."""
    n, h, w = feat.shape[:3]
    j1, _, _, c, cp = part_w.shape
    masked = feat[..., None, :] * attn[..., :, None]  # (N,H,W,J+1,C)
    cols = _group_cols(masked, 3, 3)                  # (J+1, NHW, C*9)
    wmat = part_w.transpose(0, 3, 1, 2, 4).reshape(j1, c * 9, cp)
    out = (cols @ wmat).reshape(j1, n, h, w, cp).transpose(1, 2, 3, 0, 4)
    return out + part_b, masked


def _part_attend_backward(dout, feat, attn, masked, part_w):
    n, h, w, j1, cp = dout.shape
    c = feat.shape[-1]
    cols = _group_cols(masked, 3, 3)                          # (J+1, NHW, C*9)
    dflat = dout.transpose(3, 0, 1, 2, 4).reshape(j1, -1, cp)  # (J+1, NHW, C')
    dw = (cols.transpose(0, 2, 1) @ dflat).reshape(j1, c, 3, 3, cp).transpose(0, 2, 3, 1, 4)
    db = dout.sum(axis=(0, 1, 2))

    # dmasked[..., j, c] = sum_{k,l,d} dout_pad[.., j, d](k,l) * part_w[j, 2-k, 2-l, c, d]
    dcols = _group_cols(dout, 3, 3)  # (J+1, NHW, C'*9)
    w_ft = part_w[:, ::-1, ::-1].transpose(0, 4, 1, 2, 3).reshape(j1, cp * 9, c)
    dmasked = (dcols @ w_ft).reshape(j1, n, h, w, c).transpose(1, 2, 3, 0, 4)

    dfeat = np.einsum("nhwjc,nhwj->nhwc", dmasked, attn)
    dattn = np.einsum("nhwjc,nhwc->nhwj", dmasked, feat)
    return dw, db, dfeat, dattn


def part_attend(feat: np.ndarray, attn: np.ndarray, part_w: np.ndarray,
                part_b: np.ndarray | None = None) -> np.ndarray:
    """Per-part gated convolution, concatenated along channels in part order.

    feat (..., H, W, C) and attn (..., H, W, J+1) share spatial dims; the
    result has C' * (J+1) channels laid out part-major.
    """
    feat = np.asarray(feat, dtype=np.float64)
    attn = np.asarray(attn, dtype=np.float64)
    squeeze = feat.ndim == 3
    if squeeze:
        feat, attn = feat[None], attn[None]
    if feat.shape[:3] != attn.shape[:3]:
        raise ValueError(f"feature/attention shapes disagree: {feat.shape} vs {attn.shape}")
    j1, _, _, c, cp = part_w.shape
    if attn.shape[-1] != j1:
        raise ValueError(f"attention has {attn.shape[-1]} channels, weights expect {j1}")
    if feat.shape[-1] != c:
        raise ValueError(f"features have {feat.shape[-1]} channels, weights expect {c}")
    if part_b is None:
        part_b = np.zeros((j1, cp))
    out, _ = _part_attend_batched(feat, attn, part_w, part_b)
    n, h, w = out.shape[:3]
    cat = out.reshape(n, h, w, j1 * cp)
    return cat[0] if squeeze else cat


@dataclass
class _ForwardCache:
    x: np.ndarray
    stub_pre: list[np.ndarray]
    stub_in: list[np.ndarray]
    feat: np.ndarray
    att_pre: np.ndarray
    att_hidden: np.ndarray
    att_logits: np.ndarray
    attn: np.ndarray
    masked: np.ndarray
    cat: np.ndarray
    normed: np.ndarray
    gated: np.ndarray
    contact_logits: np.ndarray


def _forward_impl(params: HeadParams, x: np.ndarray) -> _ForwardCache:
    cfg = params.config
    if x.shape[-1] != cfg.in_channels:
        raise ValueError(f"input has {x.shape[-1]} channels, config expects {cfg.in_channels}")

    stub_pre, stub_in = [], [x]
    h = x
    for w, b in zip(params.stub_w, params.stub_b):
        z = conv2d(h, w, b)
        stub_pre.append(z)
        h = relu(z)
        stub_in.append(h)
    feat = h

    att_pre = conv2d(feat, params.att_w, params.att_b)
    att_hidden = relu(att_pre)
    att_logits = conv2d(att_hidden, params.att_cls_w, params.att_cls_b)
    # unchecked softmax: a diverging forward must reach the loss as non-finite
    # instead of raising here, so the trainer can report the iteration
    attn = _softmax_stable(att_logits)

    part_out, masked = _part_attend_batched(feat, attn, params.part_w, params.part_b)
    n, hh, ww = part_out.shape[:3]
    cat = part_out.reshape(n, hh, ww, cfg.concat_channels)
    if cfg.norm == "affine":
        normed = cat * params.norm_gain + params.norm_bias
    else:
        normed = cat
    gated = relu(normed)
    contact_logits = conv2d(gated, params.out_w, params.out_b)

    return _ForwardCache(x, stub_pre, stub_in, feat, att_pre, att_hidden,
                         att_logits, attn, masked, cat, normed, gated, contact_logits)


def forward(params: HeadParams, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Run the head on an image or feature stack.

    Accepts (H,W), (H,W,Cin) or (N,H,W,Cin); returns (attention logits,
    contact logits), each with J+1 trailing channels and matching batching.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[..., None]
    squeeze = x.ndim == 3
    if squeeze:
        x = x[None]
    cache = _forward_impl(params, x)
    if squeeze:
        return cache.att_logits[0], cache.contact_logits[0]
    return cache.att_logits, cache.contact_logits


# ---------------------------------------------------------------------------
# Loss.

@dataclass(frozen=True)
class LossConfig:
    lambda_a: float = LAMBDA_A_INITIAL
    lambda_c: float = LAMBDA_C
    background_weight: float = BACKGROUND_WEIGHT
    foreground_weight: float = 1.0
    attention_epochs: int = LAMBDA_A_EPOCHS

    def __post_init__(self):
        for name in ("lambda_a", "lambda_c", "background_weight", "foreground_weight"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    def effective_lambda_a(self, epoch: int) -> float:
        """Schedule value for a 1-based epoch: lambda_a through the warm-up, then 0."""
        return self.lambda_a if epoch <= self.attention_epochs else 0.0


def _check_labels(labels: np.ndarray, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ValueError(f"labels must be in 0..{num_classes - 1}")
    return labels.astype(np.int64)


def _weighted_ce(logits, labels, cfg: LossConfig, with_grad: bool = True):
    """Weighted-mean pixel cross-entropy and its gradient w.r.t. the logits."""
    labels = _check_labels(labels, logits.shape[-1])
    if logits.shape[:-1] != labels.shape:
        raise ValueError(f"logits {logits.shape} do not match labels {labels.shape}")
    weights = np.where(labels == 0, cfg.background_weight, cfg.foreground_weight)
    wsum = weights.sum()

    shifted = logits - logits.max(axis=-1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    logp = shifted - logz
    picked = np.take_along_axis(logp, labels[..., None], axis=-1)[..., 0]
    value = float((weights * -picked).sum() / wsum)
    if not with_grad:
        return value, None

    grad = np.exp(logp)
    np.subtract.at(grad, (*np.indices(labels.shape), labels), 1.0)
    grad *= (weights / wsum)[..., None]
    return value, grad


def loss(contact_logits, attention_logits, gt_contact, gt_parts,
         cfg: LossConfig = LossConfig()) -> float:
    """Weighted two-term objective: lambda_a * attention CE + lambda_c * contact CE."""
    contact_logits = np.asarray(contact_logits, dtype=np.float64)
    attention_logits = np.asarray(attention_logits, dtype=np.float64)
    lc, _ = _weighted_ce(contact_logits, np.asarray(gt_contact), cfg)
    la, _ = _weighted_ce(attention_logits, np.asarray(gt_parts), cfg)
    return cfg.lambda_a * la + cfg.lambda_c * lc


def loss_and_gradients(params: HeadParams, images, gt_contact, gt_parts,
                       cfg: LossConfig = LossConfig()) -> tuple[float, HeadParams]:
    """Forward + full backward pass; returns (loss, gradients in params layout)."""
    x = np.asarray(images, dtype=np.float64)
    if x.ndim == 3:
        x = x[..., None]
    cache = _forward_impl(params, x)
    cfgd = params.config

    lc, dcontact = _weighted_ce(cache.contact_logits, np.asarray(gt_contact), cfg)
    la, datt_direct = _weighted_ce(cache.att_logits, np.asarray(gt_parts), cfg)
    total = cfg.lambda_a * la + cfg.lambda_c * lc
    dcontact *= cfg.lambda_c
    datt_direct *= cfg.lambda_a

    dout_w, dout_b = conv2d_param_grad(cache.gated, dcontact, 1, 1)
    dgated = conv2d_input_grad(dcontact, params.out_w)
    dnormed = dgated * (cache.normed > 0)
    if cfgd.norm == "affine":
        dnorm_gain = (dnormed * cache.cat).sum(axis=(0, 1, 2))
        dnorm_bias = dnormed.sum(axis=(0, 1, 2))
        dcat = dnormed * params.norm_gain
    else:
        dnorm_gain = dnorm_bias = None
        dcat = dnormed

    n, hh, ww = dcat.shape[:3]
    dpart_out = dcat.reshape(n, hh, ww, cfgd.num_classes, cfgd.part_channels)
    dpart_w, dpart_b, dfeat_pa, dattn = _part_attend_backward(
        dpart_out, cache.feat, cache.attn, cache.masked, params.part_w)

    datt_logits = datt_direct + _softmax_backward(cache.attn, dattn)
    datt_cls_w, datt_cls_b = conv2d_param_grad(cache.att_hidden, datt_logits, 1, 1)
    datt_hidden = conv2d_input_grad(datt_logits, params.att_cls_w)
    datt_pre = datt_hidden * (cache.att_pre > 0)
    datt_w, datt_b = conv2d_param_grad(cache.feat, datt_pre, 3, 3)
    dfeat = dfeat_pa + conv2d_input_grad(datt_pre, params.att_w)

    dstub_w: list[np.ndarray] = [None] * len(params.stub_w)  # type: ignore[list-item]
    dstub_b: list[np.ndarray] = [None] * len(params.stub_b)  # type: ignore[list-item]
    dh = dfeat
    for i in reversed(range(len(params.stub_w))):
        dz = dh * (cache.stub_pre[i] > 0)
        dstub_w[i], dstub_b[i] = conv2d_param_grad(cache.stub_in[i], dz, 3, 3)
        dh = conv2d_input_grad(dz, params.stub_w[i])

    grads = HeadParams(cfgd, dstub_w, dstub_b, datt_w, datt_b, datt_cls_w,
                       datt_cls_b, dpart_w, dpart_b, dout_w, dout_b,
                       dnorm_gain, dnorm_bias)
    return total, grads


def gradients(params: HeadParams, batch, cfg: LossConfig = LossConfig()) -> HeadParams:
    """Analytic parameter gradients for a (images, gt_contact, gt_parts) batch."""
    images, gt_contact, gt_parts = batch
    _, grads = loss_and_gradients(params, images, gt_contact, gt_parts, cfg)
    return grads


# ---------------------------------------------------------------------------
# Finite-difference verification.

def flatten_params(params: HeadParams) -> np.ndarray:
    return np.concatenate([a.reshape(-1) for _, a in params.named_arrays()])


def params_from_vector(template: HeadParams, vec: np.ndarray) -> HeadParams:
    arrays: dict[str, np.ndarray] = {}
    pos = 0
    for name, a in template.named_arrays():
        arrays[name] = vec[pos : pos + a.size].reshape(a.shape).copy()
        pos += a.size
    if pos != vec.size:
        raise ValueError(f"vector has {vec.size} entries, parameters need {pos}")
    return template.replace_arrays(arrays)


@dataclass(frozen=True)
class GradCheckReport:
    num_parameters: int
    max_abs_error: float
    worst_name: str
    worst_analytic: float
    worst_numeric: float
    failures: int

    @property
    def ok(self) -> bool:
        return self.failures == 0


def gradcheck_setup(config: HeadConfig, seed: int, height: int = 6, width: int = 6,
                    margin: float = 5e-4, attempts: int = 64):
    """Derive (params, batch) for finite-difference checking, deterministically.

    Central differences are invalid when a probe flips a ReLU, so draws are
    retried (still seed-determined) until every ReLU input sits at least
    ``margin`` from zero; with step 1e-4 all probes then stay one-sided.
    """
    for attempt in range(attempts):
        root = np.random.SeedSequence([int(seed), attempt])
        s_params, s_batch = root.spawn(2)
        params = init_params(config, seed=s_params)
        rng = np.random.default_rng(s_batch)
        images = rng.uniform(0.0, 1.0, (1, height, width, config.in_channels))
        gt_contact = rng.integers(0, config.num_classes, (1, height, width))
        gt_parts = rng.integers(0, config.num_classes, (1, height, width))
        cache = _forward_impl(params, images)
        pres = cache.stub_pre + [cache.att_pre, cache.normed]
        if min(float(np.abs(z).min()) for z in pres) >= margin:
            return params, (images, gt_contact, gt_parts)
    raise RuntimeError(f"no kink-free gradient-check setup found for seed {seed}")


def gradient_check(params: HeadParams, batch, cfg: LossConfig = LossConfig(),
                   step: float = 1e-4) -> GradCheckReport:
    """Compare analytic gradients to central finite differences.

    An entry fails when |analytic - numeric| > max(1e-4, 1e-2 * |numeric|).
    """
    images, gt_contact, gt_parts = batch
    x = np.asarray(images, dtype=np.float64)
    if x.ndim == 3:
        x = x[..., None]
    analytic = flatten_params(gradients(params, batch, cfg))
    vec = flatten_params(params)

    def eval_at(v):
        p = params_from_vector(params, v)
        cache = _forward_impl(p, x)
        lc, _ = _weighted_ce(cache.contact_logits, gt_contact, cfg, with_grad=False)
        la, _ = _weighted_ce(cache.att_logits, gt_parts, cfg, with_grad=False)
        return cfg.lambda_a * la + cfg.lambda_c * lc

    numeric = np.empty_like(vec)
    for i in range(vec.size):
        probe = vec.copy()
        probe[i] = vec[i] + step
        up = eval_at(probe)
        probe[i] = vec[i] - step
        down = eval_at(probe)
        numeric[i] = (up - down) / (2.0 * step)

    err = np.abs(analytic - numeric)
    tol = np.maximum(1e-4, 1e-2 * np.abs(numeric))
    failures = int(np.count_nonzero(err > tol))
    worst = int(np.argmax(err - tol))

    names = []
    for name, a in params.named_arrays():
        names.extend([name] * a.size)
    return GradCheckReport(
        num_parameters=vec.size,
        max_abs_error=float(err.max()),
        worst_name=names[worst],
        worst_analytic=float(analytic[worst]),
        worst_numeric=float(numeric[worst]),
        failures=failures,
    )


# ---------------------------------------------------------------------------
# Training and inference.

def poly_lr(base_lr: float, iteration: int, total_iterations: int,
            power: float = POLY_DECAY_POWER) -> float:
    return base_lr * (1.0 - iteration / total_iterations) ** power


def train_toy(dataset, epochs: int, base_lr: float = DEFAULT_BASE_LR, seed: int = 0,
              loss_cfg: LossConfig = LossConfig(), head_cfg: HeadConfig | None = None,
              batch_size: int | None = None, params: HeadParams | None = None,
              callback=None) -> HeadParams:
    """Plain gradient descent with polynomial lr decay and the lambda_a schedule.

    ``dataset`` is (images (N,H,W[,Cin]), gt_contact (N,H,W), gt_parts (N,H,W)).
    Full-batch by default; a smaller ``batch_size`` shuffles deterministically
    per seed. Raises TrainingDiverged if the loss goes non-finite.
    """
    images, gt_contact, gt_parts = dataset
    images = np.asarray(images, dtype=np.float64)
    if images.ndim == 3:
        images = images[..., None]
    gt_contact = np.asarray(gt_contact, dtype=np.int64)
    gt_parts = np.asarray(gt_parts, dtype=np.int64)
    n = images.shape[0]
    if n == 0:
        raise ValueError("dataset is empty")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")

    if params is None:
        if head_cfg is None:
            head_cfg = HeadConfig(in_channels=images.shape[-1])
        params = init_params(head_cfg, seed)

    bs = n if batch_size is None or batch_size <= 0 else min(batch_size, n)
    iters_per_epoch = (n + bs - 1) // bs
    total_iters = epochs * iters_per_epoch
    rng = np.random.default_rng(seed)

    it = 0
    for epoch in range(1, epochs + 1):
        cfg_epoch = replace(loss_cfg, lambda_a=loss_cfg.effective_lambda_a(epoch))
        order = rng.permutation(n) if bs < n else np.arange(n)
        for start in range(0, n, bs):
            sel = order[start : start + bs]
            lr = poly_lr(base_lr, it, total_iters)
            with np.errstate(over="ignore", invalid="ignore", under="ignore"):
                value, grads = loss_and_gradients(
                    params, images[sel], gt_contact[sel], gt_parts[sel], cfg_epoch)
            if not np.isfinite(value):
                raise TrainingDiverged(it, value)
            updated = {
                name: arr - lr * g
                for (name, arr), (_, g) in zip(params.named_arrays(), grads.named_arrays())
            }
            params = params.replace_arrays(updated)
            if callback is not None:
                callback(it, epoch, value)
            it += 1
    return params


def predict(params: HeadParams, image) -> ContactMap:
    """Per-pixel argmax over the 18 contact classes (ties go to the lowest id)."""
    _, contact_logits = forward(params, np.asarray(image, dtype=np.float64))
    labels = np.argmax(contact_logits, axis=-1).astype(np.uint8)
    return ContactMap(labels)
