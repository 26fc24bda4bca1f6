"""CBOW word2vec with negative sampling, trained over chord-ID sequences.

The hot loop is a numba kernel; `cbow_step` is the plain-numpy reference for
the same update, used by the gradient tests and kept in lockstep with the
kernel by an equivalence test. Contexts never cross piece boundaries; the
window is fixed (no dynamic shrink). Noise IDs are drawn from the unigram
distribution raised to 0.75.

Single-worker training is deterministic for a fixed seed. `train_parallel`
runs lock-free asynchronous updates across threads over shared matrices;
interleaving makes the result non-deterministic, so the single-worker path
is the reference mode.
"""

from __future__ import annotations

import hashlib
import json
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from numba import njit

from .errors import EmptyTrainingData, IdOutOfRange, VocabMismatch
from .vocab import PieceSequence, Vocabulary

_MAGIC = b"CTEM"
_FORMAT_VERSION = 1
_LR_FLOOR = 1e-4  # fraction of initial_lr
_MAX_EXP = 30.0


@dataclass
class TrainConfig:
    dim: int = 120
    window: int = 6
    min_count: int = 1
    negatives: int = 5
    epochs: int = 5
    initial_lr: float = 0.025
    seed: int = 1
    subsample: float = 0.0  # 0 disables frequent-token subsampling

    def validate(self) -> None:
        if self.dim <= 0:
            raise ValueError("dim must be > 0")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.min_count < 1:
            raise ValueError("min_count must be >= 1")
        if self.negatives < 1:
            raise ValueError("negatives must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.initial_lr <= 0:
            raise ValueError("initial_lr must be > 0")
        if self.subsample < 0:
            raise ValueError("subsample must be >= 0")


def noise_cdf(counts) -> np.ndarray:
    """Cumulative noise distribution proportional to count ** 0.75."""
    weights = np.asarray(counts, dtype=np.float64) ** 0.75
    total = weights.sum()
    if total <= 0:
        raise ValueError("all counts are zero")
    cdf = np.cumsum(weights / total)
    cdf[-1] = 1.0
    return cdf


def negative_sample(counts, rng: np.random.Generator) -> int:
    """Draw one noise ID with probability proportional to count ** 0.75."""
    cdf = noise_cdf(counts)
    return int(np.searchsorted(cdf, rng.random(), side="left"))


def _sigmoid(x: float) -> float:
    if x > _MAX_EXP:
        return 1.0
    if x < -_MAX_EXP:
        return 0.0
    return 1.0 / (1.0 + np.exp(-x))


def cbow_step(input_vectors, output_vectors, context_ids, target_id, negative_ids, lr):
    """One CBOW negative-sampling update; returns the loss before the update.

    loss = -log sigmoid(v'_t . h) - sum_n log sigmoid(-v'_n . h),
    h = mean of the context input vectors. Both matrices are updated in place
    by the exact analytic gradient scaled by lr (the context gradient is
    divided by the context size, matching h's mean).
    """
    ctx = np.asarray(context_ids, dtype=np.int64)
    h = input_vectors[ctx].mean(axis=0)
    loss = 0.0
    grad_h = np.zeros_like(h)
    pairs = [(target_id, 1.0)] + [(n, 0.0) for n in negative_ids]
    for wid, label in pairs:
        f = float(np.dot(h, output_vectors[wid]))
        sig = _sigmoid(f)
        if label == 1.0:
            loss -= np.log(max(sig, 1e-308))
        else:
            loss -= np.log(max(1.0 - sig, 1e-308))
        g = (label - sig) * lr
        grad_h += g * output_vectors[wid]
        output_vectors[wid] = output_vectors[wid] + g * h
    for cid in ctx:
        input_vectors[cid] = input_vectors[cid] + grad_h / len(ctx)
    return float(loss)


@njit(cache=True, nogil=True)
def _train_kernel(syn0, syn1, tokens, offsets, window, negatives, cdf, initial_lr, epochs, seed):
    np.random.seed(seed)
    dim = syn0.shape[1]
    n_tokens = tokens.shape[0]
    total = epochs * n_tokens if epochs > 0 else 1
    processed = 0
    neu1 = np.zeros(dim, dtype=np.float32)
    neu1e = np.zeros(dim, dtype=np.float32)
    for _ in range(epochs):
        for p in range(offsets.shape[0] - 1):
            start = offsets[p]
            end = offsets[p + 1]
            for pos in range(start, end):
                lr = initial_lr * (1.0 - processed / total)
                if lr < initial_lr * _LR_FLOOR:
                    lr = initial_lr * _LR_FLOOR
                processed += 1
                target = tokens[pos]
                c0 = pos - window
                if c0 < start:
                    c0 = start
                c1 = pos + window + 1
                if c1 > end:
                    c1 = end
                cn = c1 - c0 - 1
                if cn <= 0:
                    continue
                for d in range(dim):
                    neu1[d] = 0.0
                    neu1e[d] = 0.0
                for j in range(c0, c1):
                    if j == pos:
                        continue
                    w = tokens[j]
                    for d in range(dim):
                        neu1[d] += syn0[w, d]
                for d in range(dim):
                    neu1[d] /= cn
                for s in range(negatives + 1):
                    if s == 0:
                        w = target
                        label = np.float32(1.0)
                    else:
                        w = np.searchsorted(cdf, np.random.random())
                        tries = 0
                        while w == target and tries < 16:
                            w = np.searchsorted(cdf, np.random.random())
                            tries += 1
                        if w == target:
                            continue  # vocabulary too small to exclude the target
                        label = np.float32(0.0)
                    f = np.float32(0.0)
                    for d in range(dim):
                        f += neu1[d] * syn1[w, d]
                    if f > _MAX_EXP:
                        sig = np.float32(1.0)
                    elif f < -_MAX_EXP:
                        sig = np.float32(0.0)
                    else:
                        sig = np.float32(1.0 / (1.0 + np.exp(-f)))
                    g = np.float32((label - sig) * lr)
                    for d in range(dim):
                        neu1e[d] += g * syn1[w, d]
                        syn1[w, d] += g * neu1[d]
                for j in range(c0, c1):
                    if j == pos:
                        continue
                    w = tokens[j]
                    for d in range(dim):
                        syn0[w, d] += neu1e[d] / cn
    return syn0


@dataclass
class EmbeddingModel:
    input_vectors: np.ndarray  # V x D, float32
    output_vectors: np.ndarray
    config: TrainConfig
    vocab_hash: str
    metadata: dict = field(default_factory=dict)

    @property
    def vocab_size(self) -> int:
        return self.input_vectors.shape[0]

    def _check_id(self, wid: int) -> None:
        if not 0 <= wid < self.vocab_size:
            raise IdOutOfRange(f"ID {wid} outside 0..{self.vocab_size - 1}")

    def vector(self, wid: int) -> np.ndarray:
        self._check_id(wid)
        return self.input_vectors[wid]

    def cosine(self, id_a: int, id_b: int) -> float:
        """Cosine similarity of the two input vectors; 0 if either has zero norm."""
        self._check_id(id_a)
        self._check_id(id_b)
        return cosine_vectors(self.input_vectors[id_a], self.input_vectors[id_b])

    def save(self, path) -> None:
        cfg_blob = json.dumps(asdict(self.config)).encode()
        v, d = self.input_vectors.shape
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<IQQ", _FORMAT_VERSION, v, d))
            fh.write(struct.pack("<I", len(cfg_blob)))
            fh.write(cfg_blob)
            fh.write(self.vocab_hash.encode())
            fh.write(np.ascontiguousarray(self.input_vectors, dtype="<f4").tobytes())
            fh.write(np.ascontiguousarray(self.output_vectors, dtype="<f4").tobytes())

    @classmethod
    def load(cls, path, vocab: Vocabulary | None = None) -> "EmbeddingModel":
        with open(path, "rb") as fh:
            if fh.read(4) != _MAGIC:
                raise ValueError(f"{path}: not a model file")
            version, v, d = struct.unpack("<IQQ", fh.read(20))
            if version != _FORMAT_VERSION:
                raise ValueError(f"{path}: unsupported format version {version}")
            (cfg_len,) = struct.unpack("<I", fh.read(4))
            config = TrainConfig(**json.loads(fh.read(cfg_len)))
            vocab_hash = fh.read(64).decode()
            data = np.frombuffer(fh.read(v * d * 4), dtype="<f4").reshape(v, d).copy()
            data2 = np.frombuffer(fh.read(v * d * 4), dtype="<f4").reshape(v, d).copy()
            if data.size != v * d or data2.size != v * d:
                raise ValueError(f"{path}: truncated matrices")
        if vocab is not None and vocab.digest() != vocab_hash:
            raise VocabMismatch(
                f"model digest {vocab_hash[:12]}... does not match vocabulary"
            )
        return cls(
            input_vectors=data,
            output_vectors=data2,
            config=config,
            vocab_hash=vocab_hash,
        )


def cosine_vectors(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def _token_arrays(sequences, vocab_size, cfg, rng):
    """Concatenated per-piece token arrays with piece-boundary offsets."""
    counts = np.zeros(vocab_size, dtype=np.int64)
    for seq in sequences:
        for wid in seq.ids:
            if not 0 <= wid < vocab_size:
                raise IdOutOfRange(f"ID {wid} outside vocabulary of size {vocab_size}")
            counts[wid] += 1
    keep = counts >= cfg.min_count
    pieces = []
    for seq in sequences:
        ids = np.asarray(seq.ids, dtype=np.int64)
        ids = ids[keep[ids]]
        if cfg.subsample > 0:
            freq = counts[ids] / counts.sum()
            p_keep = np.minimum(1.0, np.sqrt(cfg.subsample / freq))
            ids = ids[rng.random(len(ids)) < p_keep]
        if len(ids):
            pieces.append(ids)
    if not pieces:
        raise EmptyTrainingData("no tokens survive min_count/subsampling")
    tokens = np.concatenate(pieces)
    offsets = np.zeros(len(pieces) + 1, dtype=np.int64)
    np.cumsum([len(p) for p in pieces], out=offsets[1:])
    return tokens, offsets, counts


def _probe_batch(tokens, offsets, cfg, vocab_size, rng, max_pairs=512):
    """Fixed (context, target, negatives) pairs for before/after loss probes."""
    pairs = []
    for p in range(len(offsets) - 1):
        for pos in range(offsets[p], offsets[p + 1]):
            c0 = max(offsets[p], pos - cfg.window)
            c1 = min(offsets[p + 1], pos + cfg.window + 1)
            ctx = np.concatenate([tokens[c0:pos], tokens[pos + 1 : c1]])
            if len(ctx) == 0:
                continue
            negs = rng.integers(0, vocab_size, size=cfg.negatives)
            pairs.append((ctx, int(tokens[pos]), negs))
            if len(pairs) >= max_pairs:
                return pairs
    return pairs


def probe_loss(input_vectors, output_vectors, pairs) -> float:
    total = 0.0
    for ctx, target, negs in pairs:
        h = input_vectors[ctx].astype(np.float64).mean(axis=0)
        out = output_vectors.astype(np.float64)
        f_pos = float(np.dot(h, out[target]))
        total -= np.log(max(_sigmoid(f_pos), 1e-308))
        for n in negs:
            total -= np.log(max(1.0 - _sigmoid(float(np.dot(h, out[n]))), 1e-308))
    return total / len(pairs)


def init_matrices(vocab_size, dim, seed):
    """Input vectors uniform in [-0.5/D, 0.5/D); output vectors zero."""
    rng = np.random.default_rng(seed)
    syn0 = ((rng.random((vocab_size, dim)) - 0.5) / dim).astype(np.float32)
    syn1 = np.zeros((vocab_size, dim), dtype=np.float32)
    return syn0, syn1


def train(
    sequences: list[PieceSequence], vocab: Vocabulary, cfg: TrainConfig | None = None
) -> EmbeddingModel:
    """Train CBOW embeddings; deterministic for a fixed seed (single worker)."""
    cfg = cfg or TrainConfig()
    cfg.validate()
    if not sequences:
        raise EmptyTrainingData("no sequences")
    vocab_size = len(vocab)
    rng = np.random.default_rng(cfg.seed)
    tokens, offsets, counts = _token_arrays(sequences, vocab_size, cfg, rng)
    cdf = noise_cdf(np.maximum(counts, 0) + (counts.sum() == 0))
    syn0, syn1 = init_matrices(vocab_size, cfg.dim, cfg.seed)
    pairs = _probe_batch(tokens, offsets, cfg, vocab_size, rng)
    loss_before = probe_loss(syn0, syn1, pairs)
    if cfg.epochs > 0:
        _train_kernel(
            syn0,
            syn1,
            tokens,
            offsets,
            cfg.window,
            cfg.negatives,
            cdf,
            cfg.initial_lr,
            cfg.epochs,
            cfg.seed % (2**32),
        )
    loss_after = probe_loss(syn0, syn1, pairs)
    if not np.isfinite(syn0).all() or not np.isfinite(syn1).all():
        raise ArithmeticError("training produced non-finite vectors")
    return EmbeddingModel(
        input_vectors=syn0,
        output_vectors=syn1,
        config=cfg,
        vocab_hash=vocab.digest(),
        metadata={
            "probe_loss_before": loss_before,
            "probe_loss_after": loss_after,
            "tokens": int(tokens.shape[0]),
        },
    )


def train_parallel(
    sequences: list[PieceSequence],
    vocab: Vocabulary,
    cfg: TrainConfig | None = None,
    workers: int = 2,
) -> EmbeddingModel:
    """Lock-free asynchronous training; non-deterministic across runs."""
    if workers <= 1:
        return train(sequences, vocab, cfg)
    cfg = cfg or TrainConfig()
    cfg.validate()
    vocab_size = len(vocab)
    rng = np.random.default_rng(cfg.seed)
    tokens, offsets, counts = _token_arrays(sequences, vocab_size, cfg, rng)
    cdf = noise_cdf(np.maximum(counts, 0) + (counts.sum() == 0))
    syn0, syn1 = init_matrices(vocab_size, cfg.dim, cfg.seed)
    pairs = _probe_batch(tokens, offsets, cfg, vocab_size, rng)
    loss_before = probe_loss(syn0, syn1, pairs)

    n_pieces = len(offsets) - 1
    shards = []
    for w in range(workers):
        piece_idx = list(range(w, n_pieces, workers))
        if not piece_idx:
            continue
        shard_tokens = np.concatenate([tokens[offsets[p] : offsets[p + 1]] for p in piece_idx])
        shard_offsets = np.zeros(len(piece_idx) + 1, dtype=np.int64)
        np.cumsum(
            [offsets[p + 1] - offsets[p] for p in piece_idx], out=shard_offsets[1:]
        )
        shards.append((shard_tokens, shard_offsets, (cfg.seed + 7919 * (w + 1)) % 2**32))
    if cfg.epochs > 0:
        with ThreadPoolExecutor(max_workers=len(shards)) as pool:
            futures = [
                pool.submit(
                    _train_kernel,
                    syn0,
                    syn1,
                    st,
                    so,
                    cfg.window,
                    cfg.negatives,
                    cdf,
                    cfg.initial_lr,
                    cfg.epochs,
                    seed,
                )
                for st, so, seed in shards
            ]
            for f in futures:
                f.result()
    loss_after = probe_loss(syn0, syn1, pairs)
    return EmbeddingModel(
        input_vectors=syn0,
        output_vectors=syn1,
        config=cfg,
        vocab_hash=vocab.digest(),
        metadata={
            "probe_loss_before": loss_before,
            "probe_loss_after": loss_after,
            "tokens": int(tokens.shape[0]),
            "workers": workers,
        },
    )
