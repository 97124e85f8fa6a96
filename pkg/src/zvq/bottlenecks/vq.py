"""Vector quantization: plain and sliced codebooks, commitment losses,
straight-through estimation, and the text code-file format."""

from dataclasses import dataclass

import numpy as np

from ..errors import DataError, NumericalError, ShapeError
from ..numerics import Tensor, ops
from ..numerics.tensor import Tape


@dataclass
class Codebook:
    """K embedding rows of width D plus the commitment weight beta."""

    embeddings: Tensor
    beta: float = 0.25

    def __post_init__(self):
        if self.embeddings.ndim != 2:
            raise ShapeError(f"codebook must be [K, D], got {self.embeddings.shape}")
        if self.beta < 0:
            raise ShapeError(f"beta must be >= 0, got {self.beta}")
        if not np.isfinite(self.embeddings.data).all():
            raise NumericalError("codebook embeddings contain non-finite values")

    @property
    def size(self) -> int:
        return self.embeddings.shape[0]

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    @classmethod
    def uniform_init(cls, size: int, dim: int, rng: np.random.Generator,
                     beta: float = 0.25) -> "Codebook":
        emb = rng.uniform(-1.0 / size, 1.0 / size, size=(size, dim)).astype(np.float32)
        return cls(Tensor(emb, requires_grad=True), beta)


@dataclass
class SlicedCodebook:
    """Independent sub-codebooks over N contiguous slices of the feature dim."""

    sub_codebooks: list[Codebook]

    def __post_init__(self):
        if not self.sub_codebooks:
            raise ShapeError("sliced codebook needs at least one sub-codebook")
        k0 = self.sub_codebooks[0].size
        d0 = self.sub_codebooks[0].dim
        for cb in self.sub_codebooks[1:]:
            if cb.size != k0 or cb.dim != d0:
                raise ShapeError(f"sub-codebooks must agree in shape: "
                                 f"[{k0}, {d0}] vs [{cb.size}, {cb.dim}]")

    @property
    def n_slices(self) -> int:
        return len(self.sub_codebooks)

    @property
    def size(self) -> int:
        return self.sub_codebooks[0].size

    @property
    def total_dim(self) -> int:
        return self.n_slices * self.sub_codebooks[0].dim

    @classmethod
    def uniform_init(cls, size: int, total_dim: int, n_slices: int,
                     rng: np.random.Generator, beta: float = 0.25) -> "SlicedCodebook":
        if total_dim % n_slices != 0:
            raise ShapeError(f"feature dim {total_dim} not divisible by {n_slices} slices")
        d = total_dim // n_slices
        return cls([Codebook.uniform_init(size, d, rng, beta) for _ in range(n_slices)])

    @classmethod
    def init_from_data(cls, z_e: np.ndarray, size: int, n_slices: int,
                       rng: np.random.Generator, beta: float = 0.25) -> "SlicedCodebook":
        """Seed each sub-codebook with rows sampled from encoder outputs.

        Sampling is without replacement when enough frames are available;
        any shortfall is filled with the uniform fallback.
        """
        z = np.asarray(z_e, dtype=np.float32)
        if z.ndim != 2 or z.shape[1] % n_slices != 0:
            raise ShapeError(f"init_from_data: bad z_e shape {z.shape} for "
                             f"{n_slices} slices")
        d = z.shape[1] // n_slices
        subs = []
        for n in range(n_slices):
            block = z[:, n * d:(n + 1) * d]
            take = min(size, block.shape[0])
            chosen = block[rng.permutation(block.shape[0])[:take]]
            if take < size:
                fill = rng.uniform(-1.0 / size, 1.0 / size,
                                   size=(size - take, d)).astype(np.float32)
                chosen = np.concatenate([chosen, fill])
            subs.append(Codebook(Tensor(chosen.copy(), requires_grad=True), beta))
        return cls(subs)

    def named(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.book{n}.embeddings": cb.embeddings
                for n, cb in enumerate(self.sub_codebooks)}


@dataclass
class QuantizeResult:
    """Quantized output, per-frame index tuple matrix [T, N], and the VQ loss."""

    z_q: Tensor
    indices: np.ndarray
    vq_loss: Tensor


@dataclass
class CodeSequence:
    """Discrete unit-discovery output: one index tuple per latent frame."""

    utterance_id: str
    indices: np.ndarray
    frame_rate_hz: float
    codebook_size: int

    @property
    def n_frames(self) -> int:
        return self.indices.shape[0]

    @property
    def n_slices(self) -> int:
        return self.indices.shape[1]


def nearest_indices(z: np.ndarray, embeddings: np.ndarray) -> np.ndarray:
    """Row-wise argmin of squared Euclidean distance; ties take the lowest index."""
    diff = z[:, None, :] - embeddings[None, :, :]
    d2 = np.square(diff).sum(axis=2)
    return np.argmin(d2, axis=1)


def straight_through(tape: Tape | None, z_e: Tensor, z_q) -> Tensor:
    """Forward the quantized values, backward the identity onto z_e.

    No gradient reaches the codebook through this path.
    """
    q = z_q.data if isinstance(z_q, Tensor) else np.asarray(z_q, dtype=np.float32)
    if q.shape != z_e.shape:
        raise ShapeError(f"straight_through: z_q {q.shape} does not match z_e {z_e.shape}")
    out = Tensor(q.copy())
    if tape is not None:
        tape.record(out, (z_e,), lambda g: (g,), "straight_through")
    return out


def vq_loss(tape: Tape | None, z_e: Tensor, z_q: Tensor, beta: float = 0.25) -> Tensor:
    """Codebook plus commitment loss, averaged over frames.

    loss = |sg(z_e) - z_q|^2 + beta * |z_e - sg(z_q)|^2 where sg stops the
    gradient: the first term's gradient reaches only z_q (and through it the
    codebook rows it was gathered from), the second term's only z_e.
    """
    if z_e.shape != z_q.shape:
        raise ShapeError(f"vq_loss: z_e {z_e.shape} vs z_q {z_q.shape}")
    if z_e.ndim != 2:
        raise ShapeError(f"vq_loss: expected [T, D] frames, got {z_e.shape}")
    t = z_e.shape[0]
    diff = z_e.data - z_q.data
    acc = float((1.0 + beta) * (diff.astype(np.float64) ** 2).sum() / t)

    def vjp(g):
        base = np.float32(2.0 * g / t) * diff
        g_ze = np.float32(beta) * base if z_e.requires_grad else None
        g_zq = -base if z_q.requires_grad else None
        return (g_ze, g_zq)

    out = Tensor(np.float32(acc))
    out.scalar_f64 = acc
    if tape is not None:
        tape.record(out, (z_e, z_q), vjp, "vq_loss")
    return out


def slice_feature(tape: Tape | None, z_e: Tensor, n_slices: int) -> list[Tensor]:
    """Split [T, D] into N contiguous [T, D/N] slices; concatenation inverts it."""
    if z_e.ndim != 2:
        raise ShapeError(f"slice_feature: expected [T, D], got {z_e.shape}")
    d = z_e.shape[1]
    if n_slices < 1 or d % n_slices != 0:
        raise ShapeError(f"slice_feature: dim {d} not divisible by {n_slices} slices")
    width = d // n_slices
    return [ops.narrow(tape, z_e, 1, n * width, width) for n in range(n_slices)]


def _check_frames(z_e: Tensor, dim: int) -> None:
    if z_e.ndim != 2 or z_e.shape[1] != dim:
        raise ShapeError(f"quantize: expected [T, {dim}] frames, got {z_e.shape}")
    if not np.isfinite(z_e.data).all():
        raise NumericalError("quantize: z_e contains non-finite values")


def sliced_vq_quantize(z_e: Tensor, book: SlicedCodebook, tape: Tape | None = None,
                       fixed_indices: np.ndarray | None = None) -> QuantizeResult:
    """Quantize each slice against its own sub-codebook.

    The loss sums the per-slice losses; the straight-through estimator is
    applied to the concatenated output, so decoder gradients reach z_e whole.
    ``fixed_indices`` bypasses the nearest-neighbor search (used to probe the
    surrogate gradient at frozen assignments).
    """
    _check_frames(z_e, book.total_dim)
    slices = slice_feature(tape, z_e, book.n_slices)
    t = z_e.shape[0]
    idx = np.empty((t, book.n_slices), dtype=np.int64)
    loss = None
    parts = []
    for n, (piece, cb) in enumerate(zip(slices, book.sub_codebooks)):
        if fixed_indices is not None:
            idx[:, n] = fixed_indices[:, n]
        else:
            idx[:, n] = nearest_indices(piece.data, cb.embeddings.data)
        gathered = ops.embed_rows(tape, cb.embeddings, idx[:, n])
        part_loss = vq_loss(tape, piece, gathered, cb.beta)
        loss = part_loss if loss is None else ops.add(tape, loss, part_loss)
        parts.append(gathered.data)
    z_q_values = np.concatenate(parts, axis=1)
    z_q = straight_through(tape, z_e, z_q_values)
    return QuantizeResult(z_q=z_q, indices=idx, vq_loss=loss)


def vq_quantize(z_e: Tensor, book: Codebook, tape: Tape | None = None) -> QuantizeResult:
    """Nearest-neighbor quantization of [T, D] frames against one codebook.

    Matches sliced quantization with N=1 bit-for-bit, but is written against
    the full feature dimension directly.
    """
    _check_frames(z_e, book.dim)
    idx = nearest_indices(z_e.data, book.embeddings.data)
    gathered = ops.embed_rows(tape, book.embeddings, idx)
    loss = vq_loss(tape, z_e, gathered, book.beta)
    z_q = straight_through(tape, z_e, gathered.data)
    return QuantizeResult(z_q=z_q, indices=idx[:, None].astype(np.int64),
                          vq_loss=loss)


# ---------------------------------------------------------------------------
# code-file format: one text line per utterance, one comma-joined index tuple
# per latent frame.

CODE_SUFFIX = ".codes"


def write_codes(seq: CodeSequence, path) -> None:
    cols = [",".join(str(i) for i in row) for row in seq.indices]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(" ".join([seq.utterance_id] + cols) + "\n")


def read_codes(path, frame_rate_hz: float, codebook_size: int = 0) -> CodeSequence:
    with open(path, encoding="utf-8") as fh:
        line = fh.readline().strip()
    if not line:
        raise DataError(f"{path}: empty code file")
    parts = line.split(" ")
    utt = parts[0]
    try:
        rows = [[int(v) for v in p.split(",")] for p in parts[1:]]
    except ValueError as e:
        raise DataError(f"{path}: malformed code file ({e})") from e
    if not rows:
        raise DataError(f"{path}: code file has no frames")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise DataError(f"{path}: inconsistent tuple width in code file")
    return CodeSequence(utterance_id=utt, indices=np.asarray(rows, dtype=np.int64),
                        frame_rate_hz=frame_rate_hz, codebook_size=codebook_size)
