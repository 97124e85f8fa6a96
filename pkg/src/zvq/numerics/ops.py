"""Differentiable array operations recorded on a Tape.

Every op takes the tape as its first argument; passing ``tape=None`` runs the
forward computation only, which is what inference and finite-difference
probing use. All arithmetic stays in float32; full reductions accumulate in
float64 before rounding once at the end.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeError
from .tensor import Tape, Tensor


def _emit(tape, data, inputs, vjp, name):
    out = Tensor(data)
    if tape is not None:
        tape.record(out, inputs, vjp, name)
    return out


def _require(cond, msg):
    if not cond:
        raise ShapeError(msg)


# ---------------------------------------------------------------------------
# elementwise and reductions


def add(tape, a: Tensor, b: Tensor) -> Tensor:
    _require(a.shape == b.shape, f"add: shape mismatch {a.shape} vs {b.shape}")
    out = _emit(tape, a.data + b.data, (a, b), lambda g: (g, g), "add")
    if a.scalar_f64 is not None and b.scalar_f64 is not None:
        # Both summands carry their float64 reduction value; their sum is the
        # float64 value of a composite loss, kept for finite-difference reads.
        out.scalar_f64 = a.scalar_f64 + b.scalar_f64
    return out


def sub(tape, a: Tensor, b: Tensor) -> Tensor:
    _require(a.shape == b.shape, f"sub: shape mismatch {a.shape} vs {b.shape}")
    return _emit(tape, a.data - b.data, (a, b), lambda g: (g, -g), "sub")


def mul(tape, a: Tensor, b: Tensor) -> Tensor:
    _require(a.shape == b.shape, f"mul: shape mismatch {a.shape} vs {b.shape}")
    return _emit(tape, a.data * b.data, (a, b),
                 lambda g: (g * b.data, g * a.data), "mul")


def relu(tape, x: Tensor) -> Tensor:
    mask = x.data > 0

    def vjp(g):
        return (g * mask,)

    return _emit(tape, np.maximum(x.data, 0), (x,), vjp, "relu")


def exp(tape, x: Tensor) -> Tensor:
    out_data = np.exp(x.data)

    def vjp(g):
        return (g * out_data,)

    return _emit(tape, out_data, (x,), vjp, "exp")


def tsum(tape, x: Tensor) -> Tensor:
    acc = float(x.data.sum(dtype=np.float64))

    def vjp(g):
        return (np.full(x.shape, np.float32(g), dtype=np.float32),)

    out = _emit(tape, np.float32(acc), (x,), vjp, "sum")
    out.scalar_f64 = acc
    return out


def tmean(tape, x: Tensor) -> Tensor:
    n = x.size
    acc = float(x.data.sum(dtype=np.float64) / n)

    def vjp(g):
        return (np.full(x.shape, np.float32(g / n), dtype=np.float32),)

    out = _emit(tape, np.float32(acc), (x,), vjp, "mean")
    out.scalar_f64 = acc
    return out


def mse(tape, pred: Tensor, target) -> Tensor:
    """Mean squared error over all elements; target may be a constant array."""
    target_t = target if isinstance(target, Tensor) else None
    tdata = target.data if target_t is not None else np.asarray(target, dtype=np.float32)
    _require(pred.shape == tdata.shape, f"mse: shape mismatch {pred.shape} vs {tdata.shape}")
    diff = pred.data - tdata
    n = diff.size
    acc = float((diff.astype(np.float64) ** 2).sum() / n)

    def vjp(g):
        gd = (np.float32(2.0 * g / n)) * diff
        return (gd, -gd) if target_t is not None else (gd,)

    inputs = (pred, target_t) if target_t is not None else (pred,)
    out = _emit(tape, np.float32(acc), inputs, vjp, "mse")
    out.scalar_f64 = acc
    return out


# ---------------------------------------------------------------------------
# shape plumbing


def reshape(tape, x: Tensor, shape) -> Tensor:
    def vjp(g):
        return (g.reshape(x.shape),)

    return _emit(tape, x.data.reshape(shape), (x,), vjp, "reshape")


def transpose(tape, x: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))

    def vjp(g):
        return (g.transpose(inv),)

    return _emit(tape, x.data.transpose(axes), (x,), vjp, "transpose")


def narrow(tape, x: Tensor, axis: int, start: int, length: int) -> Tensor:
    _require(0 <= start and start + length <= x.shape[axis],
             f"narrow: [{start}:{start + length}] out of range for axis {axis} of {x.shape}")
    sl = [slice(None)] * x.ndim
    sl[axis] = slice(start, start + length)
    sl = tuple(sl)

    def vjp(g):
        gx = np.zeros(x.shape, dtype=np.float32)
        gx[sl] = g
        return (gx,)

    return _emit(tape, x.data[sl], (x,), vjp, "narrow")


def concat_channels(tape, xs: list) -> Tensor:
    _require(len(xs) >= 1, "concat_channels: need at least one input")
    base = xs[0].shape
    for x in xs[1:]:
        _require(x.ndim == len(base) and x.shape[0] == base[0] and x.shape[2:] == base[2:],
                 f"concat_channels: incompatible shapes {base} vs {x.shape}")
    sizes = [x.shape[1] for x in xs]
    offsets = np.cumsum([0] + sizes)

    def vjp(g):
        return tuple(g[:, offsets[i]:offsets[i + 1]] for i in range(len(xs)))

    return _emit(tape, np.concatenate([x.data for x in xs], axis=1), tuple(xs), vjp, "concat")


def pad_circular(tape, x: Tensor, pad: int) -> Tensor:
    """Wrap-pad the time axis of [B, C, T] by ``pad`` on each side."""
    _require(x.ndim == 3, f"pad_circular: expected [B, C, T], got {x.shape}")
    t = x.shape[2]
    _require(0 < pad <= t, f"pad_circular: pad {pad} invalid for T={t}")

    def vjp(g):
        gx = g[:, :, pad:pad + t].copy()
        gx[:, :, t - pad:] += g[:, :, :pad]
        gx[:, :, :pad] += g[:, :, pad + t:]
        return (gx,)

    return _emit(tape, np.pad(x.data, ((0, 0), (0, 0), (pad, pad)), mode="wrap"),
                 (x,), vjp, "pad_circular")


# ---------------------------------------------------------------------------
# linear and convolutional maps


def linear(tape, x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """x [B, D_in] @ weight.T [D_in, D_out] + bias [D_out]."""
    _require(x.ndim == 2 and weight.ndim == 2,
             f"linear: expected 2-D x and weight, got {x.shape}, {weight.shape}")
    _require(x.shape[1] == weight.shape[1],
             f"linear: in-dim mismatch x {x.shape} vs weight {weight.shape}")
    _require(bias.shape == (weight.shape[0],),
             f"linear: bias {bias.shape} does not match out-dim {weight.shape[0]}")

    def vjp(g):
        gx = g @ weight.data if x.requires_grad else None
        gw = g.T @ x.data if weight.requires_grad else None
        gb = g.sum(axis=0) if bias.requires_grad else None
        return (gx, gw, gb)

    return _emit(tape, x.data @ weight.data.T + bias.data, (x, weight, bias), vjp, "linear")


def conv1d(tape, x: Tensor, weight: Tensor, bias: Tensor,
           stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation of [B, C_in, T] with weight [C_out, C_in, k].

    Output length is floor((T + 2*padding - k) / stride) + 1.
    """
    _require(x.ndim == 3, f"conv1d: expected input [B, C_in, T], got {x.shape}")
    _require(weight.ndim == 3, f"conv1d: expected weight [C_out, C_in, k], got {weight.shape}")
    b_sz, c_in, t = x.shape
    c_out, c_in_w, k = weight.shape
    _require(c_in == c_in_w, f"conv1d: channel mismatch input {x.shape} vs weight {weight.shape}")
    _require(bias.shape == (c_out,), f"conv1d: bias {bias.shape} does not match C_out={c_out}")
    _require(stride >= 1 and padding >= 0, f"conv1d: bad stride={stride} padding={padding}")
    _require(t + 2 * padding >= k,
             f"conv1d: kernel {k} longer than padded input {t + 2 * padding}")

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding))) if padding else x.data
    windows = sliding_window_view(xp, k, axis=2)[:, :, ::stride, :]
    t_out = windows.shape[2]
    # im2col: one sgemm per call; xm is kept alive for the weight gradient.
    xm = np.ascontiguousarray(windows.transpose(0, 2, 1, 3)).reshape(b_sz * t_out, c_in * k)
    wm = weight.data.reshape(c_out, c_in * k)
    out = (xm @ wm.T).reshape(b_sz, t_out, c_out).transpose(0, 2, 1)
    out = out + bias.data[None, :, None]

    def vjp(g):
        gm = np.ascontiguousarray(g.transpose(0, 2, 1)).reshape(b_sz * t_out, c_out)
        gw = (gm.T @ xm).reshape(c_out, c_in, k) if weight.requires_grad else None
        gb = g.sum(axis=(0, 2)) if bias.requires_grad else None
        gx = None
        if x.requires_grad:
            gwin = (gm @ wm).reshape(b_sz, t_out, c_in, k).transpose(0, 2, 1, 3)
            gxp = np.zeros_like(xp)
            span = stride * (t_out - 1) + 1
            for s in range(k):
                gxp[:, :, s:s + span:stride] += gwin[:, :, :, s]
            gx = gxp[:, :, padding:padding + t] if padding else gxp
        return (gx, gw, gb)

    return _emit(tape, out, (x, weight, bias), vjp, "conv1d")


def transposed_conv1d(tape, x: Tensor, weight: Tensor, bias: Tensor,
                      stride: int = 1) -> Tensor:
    """Fractionally-strided counterpart of conv1d; weight is [C_in, C_out, k].

    The full scatter output of length (T-1)*stride + k is center-cropped to
    exactly T*stride, so k >= stride is required.
    """
    _require(x.ndim == 3, f"transposed_conv1d: expected input [B, C_in, T], got {x.shape}")
    _require(weight.ndim == 3,
             f"transposed_conv1d: expected weight [C_in, C_out, k], got {weight.shape}")
    b_sz, c_in, t = x.shape
    c_in_w, c_out, k = weight.shape
    _require(c_in == c_in_w,
             f"transposed_conv1d: channel mismatch input {x.shape} vs weight {weight.shape}")
    _require(bias.shape == (c_out,),
             f"transposed_conv1d: bias {bias.shape} does not match C_out={c_out}")
    _require(stride >= 1, f"transposed_conv1d: bad stride={stride}")
    _require(k >= stride, f"transposed_conv1d: kernel {k} must be >= stride {stride}")

    t_out = t * stride
    full_len = (t - 1) * stride + k
    crop = (k - stride) // 2
    xm = np.ascontiguousarray(x.data.transpose(0, 2, 1)).reshape(b_sz * t, c_in)
    wm = weight.data.reshape(c_in, c_out * k)
    prod = (xm @ wm).reshape(b_sz, t, c_out, k)
    full = np.zeros((b_sz, c_out, full_len), dtype=np.float32)
    span = stride * (t - 1) + 1
    for s in range(k):
        full[:, :, s:s + span:stride] += prod[:, :, :, s].transpose(0, 2, 1)
    out = full[:, :, crop:crop + t_out] + bias.data[None, :, None]

    def vjp(g):
        gfull = np.zeros((b_sz, c_out, full_len), dtype=np.float32)
        gfull[:, :, crop:crop + t_out] = g
        gprod = np.empty((b_sz, t, c_out, k), dtype=np.float32)
        for s in range(k):
            gprod[:, :, :, s] = gfull[:, :, s:s + span:stride].transpose(0, 2, 1)
        gpm = gprod.reshape(b_sz * t, c_out * k)
        gx = (gpm @ wm.T).reshape(b_sz, t, c_in).transpose(0, 2, 1) if x.requires_grad else None
        gw = (xm.T @ gpm).reshape(c_in, c_out, k) if weight.requires_grad else None
        gb = g.sum(axis=(0, 2)) if bias.requires_grad else None
        return (gx, gw, gb)

    return _emit(tape, out, (x, weight, bias), vjp, "transposed_conv1d")


# ---------------------------------------------------------------------------
# pooling, broadcasting, and table lookup


def mean_time(tape, x: Tensor) -> Tensor:
    """Global average over the time axis: [B, C, T] -> [B, C]."""
    _require(x.ndim == 3, f"mean_time: expected [B, C, T], got {x.shape}")
    t = x.shape[2]

    def vjp(g):
        return (np.broadcast_to(g[:, :, None] / np.float32(t), x.shape),)

    return _emit(tape, x.data.mean(axis=2, dtype=np.float64).astype(np.float32),
                 (x,), vjp, "mean_time")


def broadcast_time(tape, x: Tensor, t: int) -> Tensor:
    """Tile [B, C] along a new time axis to [B, C, T]."""
    _require(x.ndim == 2, f"broadcast_time: expected [B, C], got {x.shape}")
    _require(t >= 1, f"broadcast_time: bad T={t}")

    def vjp(g):
        return (g.sum(axis=2),)

    return _emit(tape, np.broadcast_to(x.data[:, :, None], (*x.shape, t)),
                 (x,), vjp, "broadcast_time")


def channel_affine(tape, x: Tensor, scale: Tensor, shift: Tensor) -> Tensor:
    """Per-(batch, channel) affine map of [B, C, T] by scale/shift [B, C]."""
    _require(x.ndim == 3, f"channel_affine: expected [B, C, T], got {x.shape}")
    _require(scale.shape == x.shape[:2] and shift.shape == x.shape[:2],
             f"channel_affine: scale {scale.shape} / shift {shift.shape} "
             f"do not match input {x.shape}")

    def vjp(g):
        gx = g * scale.data[:, :, None] if x.requires_grad else None
        gs = (g * x.data).sum(axis=2) if scale.requires_grad else None
        gh = g.sum(axis=2) if shift.requires_grad else None
        return (gx, gs, gh)

    return _emit(tape, x.data * scale.data[:, :, None] + shift.data[:, :, None],
                 (x, scale, shift), vjp, "channel_affine")


def embed_rows(tape, table: Tensor, ids) -> Tensor:
    """Gather rows of table [N, E] by an integer index vector."""
    _require(table.ndim == 2, f"embed_rows: expected table [N, E], got {table.shape}")
    idx = np.asarray(ids)
    _require(idx.ndim == 1, f"embed_rows: expected 1-D ids, got shape {idx.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise ShapeError(f"embed_rows: id out of range [0, {table.shape[0]}): "
                         f"min={idx.min()} max={idx.max()}")

    def vjp(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, idx, g)
        return (gt,)

    return _emit(tape, table.data[idx], (table,), vjp, "embed_rows")
