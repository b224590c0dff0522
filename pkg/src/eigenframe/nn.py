"""Dense neural stack with hand-written reverse-mode gradients.

Architecture: a shared per-point MLP encoder max-pooled over points, an
optional self-attention block that mixes the 8 per-frame features (softmax
over plain inner-product logits, no scaling factor), frame pooling, and a
two-layer classifier head. Everything is float64 numpy; gradients are exact
up to the documented subgradient choices (ReLU at 0 and max-pool ties give
their gradient to the first index).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

N_FRAMES = 8
CHECKPOINT_FORMAT = "eigenframe-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class EncoderParams:
    weights: list  # [(3, w1), (w1, w2), ...]
    biases: list  # [(w1,), (w2,), ...]


@dataclass
class FusionParams:
    w_query: np.ndarray  # (d, d)
    w_key: np.ndarray  # (d, d)
    w_value: np.ndarray  # (d, d)


@dataclass
class ClassifierParams:
    weights: list  # [(d, hidden), (hidden, C)]
    biases: list


@dataclass
class ModelParams:
    encoder: EncoderParams
    classifier: ClassifierParams
    fusion: FusionParams | None = None

    @property
    def feature_dim(self) -> int:
        return self.encoder.weights[-1].shape[1]

    @property
    def n_classes(self) -> int:
        return self.classifier.biases[-1].shape[0]


def init_model(
    rng: np.random.Generator,
    n_classes: int,
    encoder_widths=(64, 128, 256),
    classifier_hidden: int = 128,
    with_fusion: bool = True,
) -> ModelParams:
    """He-initialized parameters; fusion starts near a pass-through average."""

    def dense(fan_in, fan_out):
        w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
        return w, np.zeros(fan_out)

    enc_w, enc_b = [], []
    fan_in = 3
    for width in encoder_widths:
        w, b = dense(fan_in, width)
        enc_w.append(w)
        enc_b.append(b)
        fan_in = width
    d = encoder_widths[-1]
    cls_w0, cls_b0 = dense(d, classifier_hidden)
    cls_w1, cls_b1 = dense(classifier_hidden, n_classes)
    fusion = None
    if with_fusion:
        fusion = FusionParams(
            w_query=rng.normal(0.0, 1.0 / d, size=(d, d)),
            w_key=rng.normal(0.0, 1.0 / d, size=(d, d)),
            w_value=np.eye(d) + rng.normal(0.0, 0.02, size=(d, d)),
        )
    return ModelParams(
        encoder=EncoderParams(enc_w, enc_b),
        classifier=ClassifierParams([cls_w0, cls_w1], [cls_b0, cls_b1]),
        fusion=fusion,
    )


# ---------------------------------------------------------------------------
# blocks: forward returns (output, cache), backward consumes the cache
# ---------------------------------------------------------------------------


def encoder_forward(params: EncoderParams, clouds: np.ndarray):
    """Per-point MLP + max pool over points. clouds (m, n, 3) -> (m, d)."""
    z = clouds
    inputs, masks = [], []
    for w, b in zip(params.weights, params.biases):
        inputs.append(z)
        a = z @ w + b
        mask = a > 0.0
        masks.append(mask)
        z = a * mask
    idx = z.argmax(axis=1)  # first index wins ties
    feature = np.take_along_axis(z, idx[:, None, :], axis=1)[:, 0, :]
    return feature, (inputs, masks, idx, z.shape[1])


def encoder_backward(params: EncoderParams, cache, dfeature: np.ndarray) -> EncoderParams:
    inputs, masks, idx, n_points = cache
    m, d = dfeature.shape
    dz = np.zeros((m, n_points, d))
    np.put_along_axis(dz, idx[:, None, :], dfeature[:, None, :], axis=1)
    grad_w = [None] * len(params.weights)
    grad_b = [None] * len(params.biases)
    for layer in reversed(range(len(params.weights))):
        da = dz * masks[layer]
        fan_in = inputs[layer].shape[-1]
        fan_out = da.shape[-1]
        grad_w[layer] = inputs[layer].reshape(-1, fan_in).T @ da.reshape(-1, fan_out)
        grad_b[layer] = da.sum(axis=(0, 1))
        if layer > 0:
            dz = da @ params.weights[layer].T
    return EncoderParams(grad_w, grad_b)


def attention_forward(params: FusionParams, feats: np.ndarray):
    """Self-attention over frames. feats (b, 8, d) -> (b, 8, d).

    Row i of the output is the softmax(<F_i Wq, F_j Wk>)-weighted sum of the
    F_j Wv. Logits are max-subtracted before exponentiation, which leaves the
    weights mathematically unchanged.
    """
    q = feats @ params.w_query
    k = feats @ params.w_key
    v = feats @ params.w_value
    logits = q @ k.transpose(0, 2, 1)
    shifted = logits - logits.max(axis=2, keepdims=True)
    e = np.exp(shifted)
    weights = e / e.sum(axis=2, keepdims=True)
    out = weights @ v
    return out, (feats, q, k, v, weights)


def attention_backward(params: FusionParams, cache, dout: np.ndarray):
    feats, q, k, v, weights = cache
    d = feats.shape[-1]
    dv = weights.transpose(0, 2, 1) @ dout
    dweights = dout @ v.transpose(0, 2, 1)
    dlogits = weights * (dweights - np.sum(dweights * weights, axis=2, keepdims=True))
    dq = dlogits @ k
    dk = dlogits.transpose(0, 2, 1) @ q
    flat = feats.reshape(-1, d)
    grads = FusionParams(
        w_query=flat.T @ dq.reshape(-1, d),
        w_key=flat.T @ dk.reshape(-1, d),
        w_value=flat.T @ dv.reshape(-1, d),
    )
    dfeats = dq @ params.w_query.T + dk @ params.w_key.T + dv @ params.w_value.T
    return grads, dfeats


def pool_frames_forward(x: np.ndarray, mode: str = "avg"):
    """Reduce (b, 8, d) over the frame axis."""
    if mode == "avg":
        return x.mean(axis=1), (x.shape[1], None)
    if mode == "max":
        idx = x.argmax(axis=1)
        return np.take_along_axis(x, idx[:, None, :], axis=1)[:, 0, :], (x.shape[1], idx)
    raise ValueError(f"unknown pooling mode {mode!r}")


def pool_frames_backward(cache, dout: np.ndarray) -> np.ndarray:
    n_frames, idx = cache
    if idx is None:
        return np.broadcast_to(dout[:, None, :] / n_frames, (dout.shape[0], n_frames, dout.shape[1])).copy()
    dx = np.zeros((dout.shape[0], n_frames, dout.shape[1]))
    np.put_along_axis(dx, idx[:, None, :], dout[:, None, :], axis=1)
    return dx


def classifier_forward(params: ClassifierParams, x: np.ndarray):
    """dense -> ReLU -> dense. x (b, d) -> logits (b, C)."""
    a = x @ params.weights[0] + params.biases[0]
    mask = a > 0.0
    hidden = a * mask
    logits = hidden @ params.weights[1] + params.biases[1]
    return logits, (x, mask, hidden)


def classifier_backward(params: ClassifierParams, cache, dlogits: np.ndarray):
    x, mask, hidden = cache
    gw1 = hidden.T @ dlogits
    gb1 = dlogits.sum(axis=0)
    dhidden = (dlogits @ params.weights[1].T) * mask
    gw0 = x.T @ dhidden
    gb0 = dhidden.sum(axis=0)
    dx = dhidden @ params.weights[0].T
    return ClassifierParams([gw0, gw1], [gb0, gb1]), dx


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy over the batch, log-sum-exp stabilized.

    Returns (loss, dloss/dlogits).
    """
    shift = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shift)
    total = e.sum(axis=1)
    rows = np.arange(logits.shape[0])
    losses = np.log(total) - shift[rows, labels]
    probs = e / total[:, None]
    dlogits = probs
    dlogits[rows, labels] -= 1.0
    dlogits /= logits.shape[0]
    return float(losses.mean()), dlogits


# ---------------------------------------------------------------------------
# single-example convenience wrappers
# ---------------------------------------------------------------------------


def encode(params: EncoderParams, cloud: np.ndarray) -> np.ndarray:
    """Feature of one cloud (n, 3) -> (d,); invariant to point order."""
    feature, _ = encoder_forward(params, np.asarray(cloud, dtype=np.float64)[None])
    return feature[0]


def attention_fuse(params: FusionParams, features: np.ndarray) -> np.ndarray:
    """Transform 8 per-frame features (8, d) -> (8, d)."""
    features = np.asarray(features, dtype=np.float64)
    if features.shape[0] != N_FRAMES:
        raise ValueError(f"expected {N_FRAMES} features, got {features.shape[0]}")
    out, _ = attention_forward(params, features[None])
    return out[0]


def fuse_pool(transformed: np.ndarray, mode: str = "avg") -> np.ndarray:
    """Reduce 8 transformed features (8, d) to the fused feature (d,)."""
    out, _ = pool_frames_forward(np.asarray(transformed, dtype=np.float64)[None], mode)
    return out[0]


def classify(params: ClassifierParams, feature: np.ndarray) -> np.ndarray:
    logits, _ = classifier_forward(params, np.asarray(feature, dtype=np.float64)[None])
    return logits[0]


def loss_softmax_ce(logits: np.ndarray, label: int) -> float:
    loss, _ = softmax_cross_entropy(
        np.asarray(logits, dtype=np.float64)[None], np.array([label])
    )
    return loss


# ---------------------------------------------------------------------------
# full pipelines
# ---------------------------------------------------------------------------


def forward_multi(
    params: ModelParams,
    canonicals: np.ndarray,
    attention: bool = True,
    pooling: str = "avg",
):
    """Multi-frame pipeline: (b, 8, n, 3) -> logits (b, C)."""
    b, f, n, _ = canonicals.shape
    feats_flat, enc_cache = encoder_forward(params.encoder, canonicals.reshape(b * f, n, 3))
    feats = feats_flat.reshape(b, f, -1)
    if attention:
        if params.fusion is None:
            raise ValueError("model has no fusion parameters")
        mixed, att_cache = attention_forward(params.fusion, feats)
    else:
        mixed, att_cache = feats, None
    pooled, pool_cache = pool_frames_forward(mixed, pooling)
    logits, cls_cache = classifier_forward(params.classifier, pooled)
    return logits, (enc_cache, att_cache, pool_cache, cls_cache, (b, f))


def backward_multi(params: ModelParams, cache, dlogits: np.ndarray) -> ModelParams:
    enc_cache, att_cache, pool_cache, cls_cache, (b, f) = cache
    cls_grads, dpooled = classifier_backward(params.classifier, cls_cache, dlogits)
    dmixed = pool_frames_backward(pool_cache, dpooled)
    if att_cache is not None:
        fusion_grads, dfeats = attention_backward(params.fusion, att_cache, dmixed)
    else:
        fusion_grads, dfeats = None, dmixed
    enc_grads = encoder_backward(params.encoder, enc_cache, dfeats.reshape(b * f, -1))
    if fusion_grads is None and params.fusion is not None:
        fusion_grads = zero_grads(params).fusion
    return ModelParams(encoder=enc_grads, classifier=cls_grads, fusion=fusion_grads)


def forward_single(params: ModelParams, clouds: np.ndarray):
    """Single-cloud pipeline: (b, n, 3) -> logits (b, C)."""
    feats, enc_cache = encoder_forward(params.encoder, clouds)
    logits, cls_cache = classifier_forward(params.classifier, feats)
    return logits, (enc_cache, cls_cache)


def backward_single(params: ModelParams, cache, dlogits: np.ndarray) -> ModelParams:
    enc_cache, cls_cache = cache
    cls_grads, dfeats = classifier_backward(params.classifier, cls_cache, dlogits)
    enc_grads = encoder_backward(params.encoder, enc_cache, dfeats)
    fusion_grads = zero_grads(params).fusion if params.fusion is not None else None
    return ModelParams(encoder=enc_grads, classifier=cls_grads, fusion=fusion_grads)


def fused_feature(
    params: ModelParams,
    canonicals: np.ndarray,
    attention: bool = True,
    pooling: str = "avg",
) -> np.ndarray:
    """The pooled multi-frame feature for one cloud's canonical set (8, n, 3)."""
    feats_flat, _ = encoder_forward(params.encoder, canonicals)
    feats = feats_flat[None]
    if attention and params.fusion is not None:
        feats, _ = attention_forward(params.fusion, feats)
    pooled, _ = pool_frames_forward(feats, pooling)
    return pooled[0]


def loss_and_gradients(
    params: ModelParams,
    batch: np.ndarray,
    labels: np.ndarray,
    attention: bool = True,
    pooling: str = "avg",
):
    """Mean batch loss and exact gradients for every parameter.

    batch is (b, 8, n, 3) for the multi-frame path or (b, n, 3) for the
    single-cloud path.
    """
    labels = np.asarray(labels)
    if batch.ndim == 4:
        logits, cache = forward_multi(params, batch, attention=attention, pooling=pooling)
        loss, dlogits = softmax_cross_entropy(logits, labels)
        grads = backward_multi(params, cache, dlogits)
    elif batch.ndim == 3:
        logits, cache = forward_single(params, batch)
        loss, dlogits = softmax_cross_entropy(logits, labels)
        grads = backward_single(params, cache, dlogits)
    else:
        raise ValueError(f"bad batch rank {batch.ndim}")
    return loss, grads, logits


# ---------------------------------------------------------------------------
# parameter flattening, finite differences, checkpoints
# ---------------------------------------------------------------------------


def iter_arrays(params: ModelParams):
    """(name, array) pairs in a fixed, reproducible order."""
    for i, (w, b) in enumerate(zip(params.encoder.weights, params.encoder.biases)):
        yield f"encoder.w{i}", w
        yield f"encoder.b{i}", b
    if params.fusion is not None:
        yield "fusion.wq", params.fusion.w_query
        yield "fusion.wk", params.fusion.w_key
        yield "fusion.wv", params.fusion.w_value
    for i, (w, b) in enumerate(zip(params.classifier.weights, params.classifier.biases)):
        yield f"classifier.w{i}", w
        yield f"classifier.b{i}", b


def flatten_params(params: ModelParams) -> np.ndarray:
    return np.concatenate([a.ravel() for _, a in iter_arrays(params)])


def unflatten_like(template: ModelParams, vec: np.ndarray) -> ModelParams:
    pos = 0

    def take(shape):
        nonlocal pos
        size = int(np.prod(shape))
        out = vec[pos : pos + size].reshape(shape).copy()
        pos += size
        return out

    # consume in iter_arrays order
    enc_w, enc_b = [], []
    for w, b in zip(template.encoder.weights, template.encoder.biases):
        enc_w.append(take(w.shape))
        enc_b.append(take(b.shape))
    fusion = None
    if template.fusion is not None:
        fusion = FusionParams(
            w_query=take(template.fusion.w_query.shape),
            w_key=take(template.fusion.w_key.shape),
            w_value=take(template.fusion.w_value.shape),
        )
    cls_w, cls_b = [], []
    for w, b in zip(template.classifier.weights, template.classifier.biases):
        cls_w.append(take(w.shape))
        cls_b.append(take(b.shape))
    if pos != vec.size:
        raise ValueError("vector length does not match the parameter template")
    return ModelParams(
        encoder=EncoderParams(enc_w, enc_b),
        classifier=ClassifierParams(cls_w, cls_b),
        fusion=fusion,
    )


def zero_grads(params: ModelParams) -> ModelParams:
    return unflatten_like(params, np.zeros(flatten_params(params).size))


def finite_difference_check(
    params: ModelParams,
    loss_fn,
    analytic: ModelParams,
    eps: float = 1e-5,
    n_coords: int = 200,
    rng: np.random.Generator | None = None,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    loss_fn maps a ModelParams to a scalar; n_coords coordinates are sampled
    without replacement. Relative error per coordinate is
    |g_a - g_fd| / max(1e-8, |g_a| + |g_fd|).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    rng = rng or np.random.default_rng(0)
    base = flatten_params(params)
    gvec = flatten_params(analytic)
    coords = rng.choice(base.size, size=min(n_coords, base.size), replace=False)
    worst = 0.0
    for c in coords:
        bumped = base.copy()
        bumped[c] += eps
        hi = loss_fn(unflatten_like(params, bumped))
        bumped[c] = base[c] - eps
        lo = loss_fn(unflatten_like(params, bumped))
        g_fd = (hi - lo) / (2.0 * eps)
        g_an = gvec[c]
        err = abs(g_an - g_fd) / max(1e-8, abs(g_an) + abs(g_fd))
        worst = max(worst, err)
    return worst


def save_checkpoint(path, params: ModelParams, meta: dict | None = None) -> None:
    """Versioned npz container: flat arrays plus a JSON metadata record."""
    record = {"format": CHECKPOINT_FORMAT, "version": CHECKPOINT_VERSION}
    record.update(meta or {})
    arrays = dict(iter_arrays(params))
    np.savez(path, __meta__=np.array(json.dumps(record)), **arrays)


def load_checkpoint(path) -> tuple[ModelParams, dict]:
    with np.load(path) as blob:
        meta = json.loads(str(blob["__meta__"]))
        if meta.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"{path}: not an eigenframe checkpoint")
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {meta.get('version')}")
        arrays = {k: blob[k] for k in blob.files if k != "__meta__"}

    def layer_count(prefix):
        return sum(1 for k in arrays if k.startswith(f"{prefix}.w"))

    enc = EncoderParams(
        weights=[arrays[f"encoder.w{i}"] for i in range(layer_count("encoder"))],
        biases=[arrays[f"encoder.b{i}"] for i in range(layer_count("encoder"))],
    )
    cls = ClassifierParams(
        weights=[arrays[f"classifier.w{i}"] for i in range(layer_count("classifier"))],
        biases=[arrays[f"classifier.b{i}"] for i in range(layer_count("classifier"))],
    )
    fusion = None
    if "fusion.wq" in arrays:
        fusion = FusionParams(arrays["fusion.wq"], arrays["fusion.wk"], arrays["fusion.wv"])
    return ModelParams(encoder=enc, classifier=cls, fusion=fusion), meta
