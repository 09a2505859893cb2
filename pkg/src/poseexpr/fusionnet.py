"""Two-branch convolutional network trained from scratch in numpy.

A shared first conv feeds a pose branch (size-preserving conv + max pool,
with a pose softmax head) and an expression branch (stride-2 conv); the two
heatmaps concatenate channel-wise, pass three more convs and a pool, and the
flattened result concatenates with a precomputed hand-crafted feature vector
before two fully connected layers and the expression softmax head.  Both
heads train jointly; no gradient flows into the hand-crafted input.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import LabelOutOfRange, ParseError, ShapeMismatch, TraceMismatch


@dataclass(frozen=True)
class NetSpec:
    input_size: int = 64
    conv1_out: int = 16  # k5 s2 p2
    conv2_out: int = 16  # both branches, k3
    conv3_out: int = 32  # k3 s1 p1
    conv4_out: int = 32  # k3 s2 p1
    conv5_out: int = 64  # k3 s1 p1
    fc_width: int = 128
    k_pose: int = 5
    n_expr: int = 7
    handcrafted_dim: int = 0

    def conv_defs(self):
        """(name, in_ch, out_ch, kernel, stride, pad) for every conv layer."""
        return [
            ("conv1", 1, self.conv1_out, 5, 2, 2),
            ("conv2_1", self.conv1_out, self.conv2_out, 3, 1, 1),
            ("conv2_2", self.conv1_out, self.conv2_out, 3, 2, 1),
            ("conv3", 2 * self.conv2_out, self.conv3_out, 3, 1, 1),
            ("conv4", self.conv3_out, self.conv4_out, 3, 2, 1),
            ("conv5", self.conv4_out, self.conv5_out, 3, 1, 1),
        ]

    def spatial_sizes(self) -> dict[str, int]:
        s1 = _conv_out(self.input_size, 5, 2, 2)
        s21 = _conv_out(s1, 3, 1, 1)
        p21 = _pool_out(s21, 2, 2)
        s22 = _conv_out(s1, 3, 2, 1)
        s3 = _conv_out(p21, 3, 1, 1)
        s4 = _conv_out(s3, 3, 2, 1)
        s5 = _conv_out(s4, 3, 1, 1)
        p5 = _pool_out(s5, 2, 2)
        return {
            "conv1": s1, "conv2_1": s21, "pool2_1": p21, "conv2_2": s22,
            "conv3": s3, "conv4": s4, "conv5": s5, "pool5": p5,
        }


@dataclass(frozen=True)
class LossWeights:
    lambda_pose: float = 1.0
    lambda_expr: float = 1.0

    def __post_init__(self):
        if self.lambda_pose < 0 or self.lambda_expr < 0:
            raise ValueError("loss weights must be non-negative")
        if self.lambda_pose == 0 and self.lambda_expr == 0:
            raise ValueError("at least one loss weight must be positive")


def _conv_out(size: int, k: int, s: int, p: int) -> int:
    return (size + 2 * p - k) // s + 1


def _pool_out(size: int, k: int, s: int) -> int:
    # ceiling sizing so odd inputs stay concatenable with stride-2 convs
    return int(math.ceil((size - k) / s)) + 1


# -- layer primitives ---------------------------------------------------------

def _im2col(x, k, stride, pad):
    n, c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    oh = _conv_out(h, k, stride, pad)
    ow = _conv_out(w, k, stride, pad)
    windows = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(2, 3))
    windows = windows[:, :, ::stride, ::stride]  # (n, c, oh, ow, k, k)
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n, oh * ow, c * k * k)
    return cols, (n, c, h, w, oh, ow)


def _col2im(dcols, meta, k, stride, pad):
    n, c, h, w, oh, ow = meta
    dxp = np.zeros((n, c, h + 2 * pad, w + 2 * pad))
    dcols = dcols.reshape(n, oh, ow, c, k, k)
    for i in range(k):
        for j in range(k):
            dxp[:, :, i : i + oh * stride : stride, j : j + ow * stride : stride] += (
                dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
            )
    if pad:
        return dxp[:, :, pad:-pad, pad:-pad]
    return dxp


def conv_forward(x, w, b, stride, pad):
    cols, meta = _im2col(x, w.shape[2], stride, pad)
    n, _, _, _, oh, ow = meta
    out = cols @ w.reshape(w.shape[0], -1).T + b
    out = out.transpose(0, 2, 1).reshape(n, w.shape[0], oh, ow)
    return out, (cols, meta, w, stride, pad)


def conv_backward(dout, cache):
    cols, meta, w, stride, pad = cache
    n, c, h, wd, oh, ow = meta
    k = w.shape[2]
    dflat = dout.reshape(n, w.shape[0], oh * ow).transpose(0, 2, 1)
    dw = np.einsum("npo,npi->oi", dflat, cols).reshape(w.shape)
    db = dflat.sum(axis=(0, 1))
    dcols = dflat @ w.reshape(w.shape[0], -1)
    dx = _col2im(dcols, meta, k, stride, pad)
    return dx, dw, db


def maxpool_forward(x, k=2, stride=2):
    n, c, h, w = x.shape
    oh = _pool_out(h, k, stride)
    ow = _pool_out(w, k, stride)
    need_h = (oh - 1) * stride + k
    need_w = (ow - 1) * stride + k
    xp = np.pad(
        x, ((0, 0), (0, 0), (0, need_h - h), (0, need_w - w)),
        constant_values=-np.inf,
    )
    windows = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(2, 3))
    windows = windows[:, :, ::stride, ::stride].reshape(n, c, oh, ow, k * k)
    arg = np.argmax(windows, axis=-1)
    out = np.take_along_axis(windows, arg[..., None], axis=-1)[..., 0]
    return out, (arg, x.shape, k, stride, oh, ow)


def maxpool_backward(dout, cache):
    arg, x_shape, k, stride, oh, ow = cache
    n, c, h, w = x_shape
    dx = np.zeros((n, c, h + k, w + k))  # slack covers the -inf padding
    iy = (np.arange(oh) * stride)[None, None, :, None] + arg // k
    ix = (np.arange(ow) * stride)[None, None, None, :] + arg % k
    nn = np.arange(n)[:, None, None, None]
    cc = np.arange(c)[None, :, None, None]
    np.add.at(dx, (nn, cc, iy, ix), dout)
    return dx[:, :, :h, :w]


def relu_forward(x):
    return np.maximum(x, 0.0), x > 0


def relu_backward(dout, mask):
    return dout * mask


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


# -- parameters ---------------------------------------------------------------

PARAM_LAYERS = (
    "conv1", "conv2_1", "conv2_2", "conv3", "conv4", "conv5",
    "fc_pose", "fc1", "fc_expr",
)


def _glorot(rng, shape, fan_in, fan_out):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_params(spec: NetSpec, seed: int = 0) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Glorot-uniform weights, zero biases, deterministic under the seed."""
    rng = np.random.default_rng(seed)
    sizes = spec.spatial_sizes()
    params = {}
    for name, cin, cout, k, _, _ in spec.conv_defs():
        w = _glorot(rng, (cout, cin, k, k), cin * k * k, cout * k * k)
        params[name] = (w, np.zeros(cout))
    pose_in = spec.conv2_out * sizes["pool2_1"] ** 2
    params["fc_pose"] = (
        _glorot(rng, (spec.k_pose, pose_in), pose_in, spec.k_pose),
        np.zeros(spec.k_pose),
    )
    fc1_in = spec.conv5_out * sizes["pool5"] ** 2 + spec.handcrafted_dim
    params["fc1"] = (
        _glorot(rng, (spec.fc_width, fc1_in), fc1_in, spec.fc_width),
        np.zeros(spec.fc_width),
    )
    params["fc_expr"] = (
        _glorot(rng, (spec.n_expr, spec.fc_width), spec.fc_width, spec.n_expr),
        np.zeros(spec.n_expr),
    )
    return params


# -- forward / backward -------------------------------------------------------

def forward(params, spec: NetSpec, images: np.ndarray, handcrafted: np.ndarray):
    """Full two-branch pass.

    images: (N, H, W) or (H, W); handcrafted: (N, hdim) or (hdim,).
    Returns (pose_logits, expr_logits, trace); logits keep the batch axis of
    the input.
    """
    single = images.ndim == 2
    x = np.asarray(images, dtype=np.float64)
    hc = np.asarray(handcrafted, dtype=np.float64)
    if single:
        x = x[None]
        hc = hc[None] if spec.handcrafted_dim else hc.reshape(1, 0)
    if x.shape[1] != spec.input_size or x.shape[2] != spec.input_size:
        raise ShapeMismatch(
            f"input: expected {spec.input_size}x{spec.input_size}, got {x.shape[1]}x{x.shape[2]}"
        )
    if hc.shape[-1] != spec.handcrafted_dim:
        raise ShapeMismatch(
            f"handcrafted: expected dim {spec.handcrafted_dim}, got {hc.shape[-1]}"
        )
    x = x[:, None]  # (N, 1, H, W)
    t = {"n": x.shape[0], "single": single, "hc": hc}

    def conv(name, inp):
        w, b = params[name]
        _, _, _, k, stride, pad = next(d for d in spec.conv_defs() if d[0] == name)
        if w.shape[1] != inp.shape[1]:
            raise ShapeMismatch(f"{name}: expected {w.shape[1]} input channels, got {inp.shape[1]}")
        out, cache = conv_forward(inp, w, b, stride, pad)
        t[name] = cache
        return out

    r1, t["relu1"] = relu_forward(conv("conv1", x))
    r21, t["relu2_1"] = relu_forward(conv("conv2_1", r1))
    p21, t["pool2_1"] = maxpool_forward(r21)
    r22, t["relu2_2"] = relu_forward(conv("conv2_2", r1))
    if p21.shape[2:] != r22.shape[2:]:
        raise ShapeMismatch(
            f"concat: pool2_1 {p21.shape[2:]} vs conv2_2 {r22.shape[2:]}"
        )
    t["concat_ch"] = p21.shape[1]

    flat_pose = p21.reshape(t["n"], -1)
    t["flat_pose"] = flat_pose
    w, b = params["fc_pose"]
    pose_logits = flat_pose @ w.T + b

    cat = np.concatenate([p21, r22], axis=1)
    r3, t["relu3"] = relu_forward(conv("conv3", cat))
    r4, t["relu4"] = relu_forward(conv("conv4", r3))
    r5, t["relu5"] = relu_forward(conv("conv5", r4))
    p5, t["pool5"] = maxpool_forward(r5)
    flat5 = p5.reshape(t["n"], -1)
    t["flat5_dim"] = flat5.shape[1]
    fused = np.concatenate([flat5, hc], axis=1)
    t["fused"] = fused
    w, b = params["fc1"]
    a6 = fused @ w.T + b
    r6, t["relu6"] = relu_forward(a6)
    t["r6"] = r6
    w, b = params["fc_expr"]
    expr_logits = r6 @ w.T + b

    if single:
        return pose_logits[0], expr_logits[0], t
    return pose_logits, expr_logits, t


def joint_loss(
    pose_logits, expr_logits, pose_label, expr_label,
    weights: LossWeights = LossWeights(),
) -> float:
    """lambda_pose * CE(pose head) + lambda_expr * CE(expression head),
    averaged over the batch when the logits are batched."""
    pose_logits = np.atleast_2d(np.asarray(pose_logits, dtype=np.float64))
    expr_logits = np.atleast_2d(np.asarray(expr_logits, dtype=np.float64))
    pose_label = np.atleast_1d(pose_label)
    expr_label = np.atleast_1d(expr_label)
    if (pose_label < 0).any() or (pose_label >= pose_logits.shape[1]).any():
        raise LabelOutOfRange(f"pose label outside 0..{pose_logits.shape[1] - 1}")
    if (expr_label < 0).any() or (expr_label >= expr_logits.shape[1]).any():
        raise LabelOutOfRange(f"expression label outside 0..{expr_logits.shape[1] - 1}")
    n = pose_logits.shape[0]
    lp = softmax(pose_logits)
    le = softmax(expr_logits)
    ce_pose = -np.log(np.maximum(lp[np.arange(n), pose_label], 1e-300)).mean()
    ce_expr = -np.log(np.maximum(le[np.arange(n), expr_label], 1e-300)).mean()
    return float(weights.lambda_pose * ce_pose + weights.lambda_expr * ce_expr)


def backward(params, spec: NetSpec, trace, pose_label, expr_label,
             weights: LossWeights = LossWeights()):
    """Exact gradients of joint_loss w.r.t. every parameter.

    Gradients from both heads meet in conv1; nothing propagates into the
    hand-crafted input.
    """
    required = ("n", "relu1", "pool2_1", "fused", "r6", "flat_pose")
    if not all(key in trace for key in required):
        raise TraceMismatch("trace does not come from a matching forward pass")
    n = trace["n"]
    pose_label = np.atleast_1d(pose_label)
    expr_label = np.atleast_1d(expr_label)
    grads = {}

    # expression head
    w_expr, _ = params["fc_expr"]
    r6 = trace["r6"]
    logits_e = r6 @ w_expr.T + params["fc_expr"][1]
    d_e = softmax(logits_e)
    d_e[np.arange(n), expr_label] -= 1.0
    d_e *= weights.lambda_expr / n
    grads["fc_expr"] = (d_e.T @ r6, d_e.sum(axis=0))
    d_r6 = d_e @ w_expr

    d_a6 = relu_backward(d_r6, trace["relu6"])
    w1, _ = params["fc1"]
    grads["fc1"] = (d_a6.T @ trace["fused"], d_a6.sum(axis=0))
    d_fused = d_a6 @ w1
    d_flat5 = d_fused[:, : trace["flat5_dim"]]  # hand-crafted slice dropped

    # pose head
    w_p, b_p = params["fc_pose"]
    flat_pose = trace["flat_pose"]
    logits_p = flat_pose @ w_p.T + b_p
    d_p = softmax(logits_p)
    d_p[np.arange(n), pose_label] -= 1.0
    d_p *= weights.lambda_pose / n
    grads["fc_pose"] = (d_p.T @ flat_pose, d_p.sum(axis=0))
    d_flat_pose = d_p @ w_p

    # trunk: pool5 <- conv5 <- conv4 <- conv3 <- concat
    arg = trace["pool5"][0]
    d_p5 = d_flat5.reshape((n,) + arg.shape[1:])
    d_r5 = maxpool_backward(d_p5, trace["pool5"])
    d_a5 = relu_backward(d_r5, trace["relu5"])
    d_r4, dw, db = conv_backward(d_a5, trace["conv5"])
    grads["conv5"] = (dw, db)
    d_a4 = relu_backward(d_r4, trace["relu4"])
    d_r3, dw, db = conv_backward(d_a4, trace["conv4"])
    grads["conv4"] = (dw, db)
    d_a3 = relu_backward(d_r3, trace["relu3"])
    d_cat, dw, db = conv_backward(d_a3, trace["conv3"])
    grads["conv3"] = (dw, db)

    ch = trace["concat_ch"]
    d_p21 = d_cat[:, :ch]
    d_r22 = d_cat[:, ch:]
    # pose branch contribution through the pose head
    arg21 = trace["pool2_1"][0]
    d_p21 = d_p21 + d_flat_pose.reshape((n,) + arg21.shape[1:])
    d_r21 = maxpool_backward(d_p21, trace["pool2_1"])
    d_a21 = relu_backward(d_r21, trace["relu2_1"])
    d_r1_a, dw, db = conv_backward(d_a21, trace["conv2_1"])
    grads["conv2_1"] = (dw, db)
    d_a22 = relu_backward(d_r22, trace["relu2_2"])
    d_r1_b, dw, db = conv_backward(d_a22, trace["conv2_2"])
    grads["conv2_2"] = (dw, db)

    d_a1 = relu_backward(d_r1_a + d_r1_b, trace["relu1"])
    _, dw, db = conv_backward(d_a1, trace["conv1"])
    grads["conv1"] = (dw, db)
    return grads


def train_step(params, spec: NetSpec, batch, weights: LossWeights, learning_rate: float):
    """One vanilla SGD step on a batch of (image, handcrafted, pose_label,
    expr_label) tuples; returns (new params, mean joint loss)."""
    if not batch:
        raise ValueError("empty batch")
    images = np.stack([np.asarray(b[0], dtype=np.float64) for b in batch])
    hcs = np.stack([np.asarray(b[1], dtype=np.float64).ravel() for b in batch])
    pose_labels = np.array([int(b[2]) for b in batch])
    expr_labels = np.array([int(b[3]) for b in batch])
    pose_logits, expr_logits, trace = forward(params, spec, images, hcs)
    loss = joint_loss(pose_logits, expr_logits, pose_labels, expr_labels, weights)
    grads = backward(params, spec, trace, pose_labels, expr_labels, weights)
    new_params = {
        name: (w - learning_rate * grads[name][0], b - learning_rate * grads[name][1])
        for name, (w, b) in params.items()
    }
    return new_params, loss


def predict_pose_cnn(params, spec: NetSpec, image: np.ndarray) -> tuple[int, np.ndarray]:
    """Pose class (1-based) from conv1 + the pose branch only; returns the
    class and the softmax confidence vector."""
    x = np.asarray(image, dtype=np.float64)
    if x.shape != (spec.input_size, spec.input_size):
        raise ShapeMismatch(
            f"input: expected {spec.input_size}x{spec.input_size}, got {x.shape}"
        )
    x = x[None, None]
    w, b = params["conv1"]
    out, _ = conv_forward(x, w, b, 2, 2)
    r1, _ = relu_forward(out)
    w, b = params["conv2_1"]
    out, _ = conv_forward(r1, w, b, 1, 1)
    r21, _ = relu_forward(out)
    p21, _ = maxpool_forward(r21)
    w, b = params["fc_pose"]
    logits = p21.reshape(1, -1) @ w.T + b
    probs = softmax(logits)[0]
    return int(np.argmax(probs)) + 1, probs


def fuse_pose_estimates(
    cnn_pose: int, cnn_confidences: np.ndarray, landmark_pose: int,
    confidence_threshold: float = 0.6,
) -> int:
    """Agreement wins; on disagreement the CNN class is taken only when its
    softmax confidence reaches the threshold, otherwise the landmark class."""
    if cnn_pose == landmark_pose:
        return cnn_pose
    if float(cnn_confidences[cnn_pose - 1]) >= confidence_threshold:
        return cnn_pose
    return landmark_pose


# -- serialization ------------------------------------------------------------

def save_net_spec(spec: NetSpec, path) -> None:
    """Layer-list text config: kind/out/k/stride/pad per layer."""
    lines = [
        "format: poseexpr-net-spec v1",
        f"input: {spec.input_size} {spec.input_size} 1",
        f"handcrafted_dim: {spec.handcrafted_dim}",
        f"k_pose: {spec.k_pose}",
        f"n_expr: {spec.n_expr}",
        f"fc_width: {spec.fc_width}",
    ]
    for name, _, cout, k, stride, pad in spec.conv_defs():
        lines.append(f"layer: conv {name} out={cout} k={k} stride={stride} pad={pad}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_net_spec(path) -> NetSpec:
    fields = {}
    convs = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            key, _, value = line.partition(":")
            key, value = key.strip(), value.strip()
            if key == "layer":
                parts = value.split()
                name = parts[1]
                opts = dict(p.split("=") for p in parts[2:])
                convs[name] = int(opts["out"])
            else:
                fields[key] = value
    if fields.get("format") != "poseexpr-net-spec v1":
        raise ParseError(f"unrecognized net spec format: {fields.get('format')!r}")
    return NetSpec(
        input_size=int(fields["input"].split()[0]),
        conv1_out=convs["conv1"],
        conv2_out=convs["conv2_1"],
        conv3_out=convs["conv3"],
        conv4_out=convs["conv4"],
        conv5_out=convs["conv5"],
        fc_width=int(fields["fc_width"]),
        k_pose=int(fields["k_pose"]),
        n_expr=int(fields["n_expr"]),
        handcrafted_dim=int(fields["handcrafted_dim"]),
    )


_PARAMS_MAGIC = b"PXNP"


def save_params(params, path) -> None:
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sHH", _PARAMS_MAGIC, 1, len(params)))
        for name in PARAM_LAYERS:
            w, b = params[name]
            name_b = name.encode()
            fh.write(struct.pack("<H", len(name_b)))
            fh.write(name_b)
            fh.write(struct.pack("<H", w.ndim))
            fh.write(struct.pack(f"<{w.ndim}Q", *w.shape))
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(struct.pack("<Q", b.size))
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_params(path):
    params = {}
    with open(path, "rb") as fh:
        magic, version, count = struct.unpack("<4sHH", fh.read(8))
        if magic != _PARAMS_MAGIC or version != 1:
            raise ParseError("not a poseexpr net parameter file")
        for _ in range(count):
            (nlen,) = struct.unpack("<H", fh.read(2))
            name = fh.read(nlen).decode()
            (ndim,) = struct.unpack("<H", fh.read(2))
            shape = struct.unpack(f"<{ndim}Q", fh.read(8 * ndim))
            w = np.frombuffer(
                fh.read(8 * int(np.prod(shape))), dtype="<f8"
            ).reshape(shape).copy()
            (bsize,) = struct.unpack("<Q", fh.read(8))
            b = np.frombuffer(fh.read(8 * bsize), dtype="<f8").copy()
            params[name] = (w, b)
    return params
