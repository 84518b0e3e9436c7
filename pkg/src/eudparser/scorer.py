"""Trainable scoring model: embeddings, a small bidirectional recurrent
encoder, and deep biaffine functions for tree arcs, extra graph edges,
and relation labels.

Every deep biaffine function (DBF) scores an ordered pair of positions:

    DBF(i, j) = v_i^head' U v_j^mod + b_head . v_i^head
                + b_mod . v_j^mod + b

where v^head / v^mod are ReLU projections of a per-DBF softmax-weighted
average of the encoder layers. The projection carries an additive bias
(c_head / c_mod) inside the affine map; the linear b terms of the DBF do
not subsume a pre-ReLU bias, so we add one and document it here.

Everything is float64 and the backward pass is written out by hand;
tests hold it to central finite differences at 1e-4 relative error.
The encoder is a desk-scale stand-in for a large pretrained model: a
learned root vector at position 0 plus word embeddings form layer 0,
and each of the L recurrent layers contributes one more mixable layer.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import asdict, dataclass, field
from typing import Iterable

import numpy as np

from .errors import ModelFormatError

MAGIC = b"EUDM"
FORMAT_VERSION = 1

Array = np.ndarray


@dataclass
class ModelConfig:
    embed_dim: int = 64
    encoder_layers: int = 2
    arc_hidden: int = 64
    rel_hidden: int = 32
    unk_buckets: int = 8

    def __post_init__(self):
        if self.embed_dim % 2:
            raise ValueError("embed_dim must be even (split across two directions)")
        if self.encoder_layers < 0:
            raise ValueError("encoder_layers must be >= 0")


@dataclass
class DbfParams:
    """Parameter views for one deep biaffine function."""

    W_head: Array
    c_head: Array
    W_mod: Array
    c_mod: Array
    U: Array
    b_head: Array
    b_mod: Array
    b: Array
    alpha_head: Array
    alpha_mod: Array


@dataclass
class EncoderOutput:
    """Per-layer vectors; ``layers[l][t]`` is position t at depth l.

    Position 0 is the virtual-root representation.
    """

    layers: Array  # (L+1, n+1, d)


@dataclass
class SentenceScores:
    """Score blocks for one sentence; column j-1 holds dependent j."""

    tree: Array  # (n+1, n)
    graph: Array  # (n+1, n)
    rel: Array  # (n+1, n, R)


@dataclass
class TrainExample:
    """Targets for the summed loss, built from gold annotation.

    ``tree_heads`` is None when extraction failed (the sentence still
    supervises the graph and label components). ``graph_targets`` are
    the positive pairs for the edge predictor and ``exclude_pairs`` are
    removed from its candidate set entirely (tree edges, whose presence
    is known by construction).
    """

    words: list[str]
    tree_heads: list[int] | None
    gold_edges: list[tuple[int, int, int]]
    graph_targets: set[tuple[int, int]]
    exclude_pairs: set[tuple[int, int]] = field(default_factory=set)


def softmax(x: Array, axis: int = -1) -> Array:
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(x: Array, axis: int = -1) -> Array:
    shifted = x - x.max(axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


def mix_layers(encoded: EncoderOutput | Array, alpha: Array) -> Array:
    """Position-wise convex combination of layers with softmax(alpha) weights."""
    layers = encoded.layers if isinstance(encoded, EncoderOutput) else encoded
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != (layers.shape[0],):
        raise ValueError(f"alpha has shape {alpha.shape}, expected ({layers.shape[0]},)")
    return np.einsum("l,lnd->nd", softmax(alpha), layers)


def dbf_score(p: DbfParams, encoded: EncoderOutput | Array, i: int, j: int) -> float:
    """Deep biaffine score for head position i and dependent position j."""
    layers = encoded.layers if isinstance(encoded, EncoderOutput) else encoded
    mixed_head = mix_layers(layers, p.alpha_head)[i]
    mixed_mod = mix_layers(layers, p.alpha_mod)[j]
    v_head = np.maximum(p.W_head @ mixed_head + p.c_head, 0.0)
    v_mod = np.maximum(p.W_mod @ mixed_mod + p.c_mod, 0.0)
    return float(v_head @ p.U @ v_mod + p.b_head @ v_head + p.b_mod @ v_mod + p.b)


def _glorot(rng: np.random.Generator, shape: tuple[int, ...]) -> Array:
    fan_out, fan_in = shape[-2], shape[-1]
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


_DBF_FIELDS = (
    "W_head", "c_head", "W_mod", "c_mod", "U",
    "b_head", "b_mod", "b", "alpha_head", "alpha_mod",
)


def _dbf_shapes(h: int, d: int, n_layers: int) -> dict[str, tuple[int, ...]]:
    lm = n_layers + 1
    return {
        "W_head": (h, d), "c_head": (h,), "W_mod": (h, d), "c_mod": (h,),
        "U": (h, h), "b_head": (h,), "b_mod": (h,), "b": (),
        "alpha_head": (lm,), "alpha_mod": (lm,),
    }


class ScoreModel:
    """Holds all trainable parameters plus the closed vocabularies."""

    def __init__(
        self,
        config: ModelConfig,
        vocab: list[str],
        label_vocab: list[str],
        params: dict[str, Array],
        mode: str = "tree-graph",
    ):
        if not label_vocab:
            raise ModelFormatError("label vocabulary must be nonempty")
        self.config = config
        self.vocab = list(vocab)
        self.label_vocab = list(label_vocab)
        self.params = params
        self.mode = mode
        self._vocab_index = {form: i for i, form in enumerate(self.vocab)}

    # ----- construction -------------------------------------------------

    @classmethod
    def initialize(
        cls,
        config: ModelConfig,
        vocab: Iterable[str],
        label_vocab: Iterable[str],
        mode: str = "tree-graph",
        seed: int = 0,
    ) -> "ScoreModel":
        vocab = list(vocab)
        label_vocab = list(label_vocab)
        rng = np.random.default_rng(seed)
        d = config.embed_dim
        dh = d // 2
        params: dict[str, Array] = {}
        params["embed.vocab"] = rng.normal(0.0, 0.5, size=(len(vocab), d))
        params["embed.unk"] = rng.normal(0.0, 0.5, size=(config.unk_buckets, d))
        params["embed.root"] = rng.normal(0.0, 0.5, size=(d,))
        for layer in range(1, config.encoder_layers + 1):
            for direction in ("fwd", "bwd"):
                prefix = f"enc.l{layer}.{direction}"
                params[f"{prefix}.Wx"] = _glorot(rng, (dh, d))
                params[f"{prefix}.Wh"] = _glorot(rng, (dh, dh))
                params[f"{prefix}.b"] = np.zeros(dh)
        for name, h in (("tree", config.arc_hidden), ("graph", config.arc_hidden)):
            for key, shape in _dbf_shapes(h, d, config.encoder_layers).items():
                if key in ("W_head", "W_mod", "U"):
                    params[f"{name}.{key}"] = _glorot(rng, shape)
                else:
                    params[f"{name}.{key}"] = np.zeros(shape)
        r = len(label_vocab)
        for key, shape in _dbf_shapes(config.rel_hidden, d, config.encoder_layers).items():
            stacked = (r, *shape)
            if key in ("W_head", "W_mod", "U"):
                params[f"rel.{key}"] = _glorot(rng, stacked)
            else:
                params[f"rel.{key}"] = np.zeros(stacked)
        for arr in params.values():
            if arr.dtype != np.float64:
                raise AssertionError("parameters must be float64")
        return cls(config, vocab, label_vocab, params, mode=mode)

    def named_parameters(self) -> list[tuple[str, Array]]:
        return list(self.params.items())

    def zero_grads(self) -> dict[str, Array]:
        return {name: np.zeros_like(arr) for name, arr in self.params.items()}

    # ----- vocabulary ---------------------------------------------------

    def word_id(self, form: str) -> int:
        idx = self._vocab_index.get(form)
        if idx is not None:
            return idx
        bucket = zlib.crc32(form.encode("utf-8")) % self.config.unk_buckets
        return len(self.vocab) + bucket

    def label_id(self, label: str) -> int:
        return self.label_vocab.index(label)

    # ----- DBF parameter views -------------------------------------------

    def _dbf(self, prefix: str, index: int | None = None) -> DbfParams:
        values = {}
        for fld in _DBF_FIELDS:
            arr = self.params[f"{prefix}.{fld}"]
            values[fld] = arr if index is None else arr[index]
        return DbfParams(**values)

    @property
    def tree_dbf(self) -> DbfParams:
        return self._dbf("tree")

    @property
    def graph_dbf(self) -> DbfParams:
        return self._dbf("graph")

    def rel_dbf(self, r: int) -> DbfParams:
        return self._dbf("rel", index=r)

    # ----- encoder --------------------------------------------------------

    def encode(self, words: list[str]) -> EncoderOutput:
        layers, _ = self._encode_forward(words)
        return EncoderOutput(layers=layers)

    def _encode_forward(self, words: list[str]):
        if not words:
            raise ValueError("cannot encode an empty sentence")
        cfg = self.config
        n = len(words)
        d = cfg.embed_dim
        word_ids = [self.word_id(w) for w in words]
        x0 = np.empty((n + 1, d))
        x0[0] = self.params["embed.root"]
        n_vocab = len(self.vocab)
        for t, wid in enumerate(word_ids, start=1):
            if wid < n_vocab:
                x0[t] = self.params["embed.vocab"][wid]
            else:
                x0[t] = self.params["embed.unk"][wid - n_vocab]
        layers = np.empty((cfg.encoder_layers + 1, n + 1, d))
        layers[0] = x0
        cache = {"word_ids": word_ids, "hidden": {}}
        for layer in range(1, cfg.encoder_layers + 1):
            prev = layers[layer - 1]
            hs_fwd = self._rnn_direction(layer, "fwd", prev)
            hs_bwd = self._rnn_direction(layer, "bwd", prev)
            cache["hidden"][(layer, "fwd")] = hs_fwd
            cache["hidden"][(layer, "bwd")] = hs_bwd
            layers[layer] = np.concatenate([hs_fwd, hs_bwd], axis=1)
        return layers, cache

    def _rnn_direction(self, layer: int, direction: str, x: Array) -> Array:
        prefix = f"enc.l{layer}.{direction}"
        Wx = self.params[f"{prefix}.Wx"]
        Wh = self.params[f"{prefix}.Wh"]
        b = self.params[f"{prefix}.b"]
        n1 = x.shape[0]
        hs = np.empty((n1, Wx.shape[0]))
        h = np.zeros(Wx.shape[0])
        positions = range(n1) if direction == "fwd" else range(n1 - 1, -1, -1)
        for t in positions:
            h = np.tanh(Wx @ x[t] + Wh @ h + b)
            hs[t] = h
        return hs

    def _encode_backward(self, layers: Array, cache: dict, d_layers: Array, grads: dict):
        cfg = self.config
        dh = cfg.embed_dim // 2
        d_current = d_layers[cfg.encoder_layers].copy() if cfg.encoder_layers else None
        for layer in range(cfg.encoder_layers, 0, -1):
            prev = layers[layer - 1]
            d_prev = np.zeros_like(prev)
            for direction, sl in (("fwd", slice(0, dh)), ("bwd", slice(dh, 2 * dh))):
                self._rnn_backward(
                    layer, direction, prev, cache["hidden"][(layer, direction)],
                    d_current[:, sl], d_prev, grads,
                )
            d_current = d_prev + d_layers[layer - 1]
        d_x0 = d_current if d_current is not None else d_layers[0]
        grads["embed.root"] += d_x0[0]
        n_vocab = len(self.vocab)
        for t, wid in enumerate(cache["word_ids"], start=1):
            if wid < n_vocab:
                grads["embed.vocab"][wid] += d_x0[t]
            else:
                grads["embed.unk"][wid - n_vocab] += d_x0[t]

    def _rnn_backward(
        self, layer: int, direction: str, x: Array, hs: Array,
        d_out: Array, d_x: Array, grads: dict,
    ):
        prefix = f"enc.l{layer}.{direction}"
        Wx = self.params[f"{prefix}.Wx"]
        Wh = self.params[f"{prefix}.Wh"]
        n1 = x.shape[0]
        carry = np.zeros(Wx.shape[0])
        if direction == "fwd":
            positions = range(n1 - 1, -1, -1)
            previous = lambda t: hs[t - 1] if t > 0 else None
        else:
            positions = range(n1)
            previous = lambda t: hs[t + 1] if t < n1 - 1 else None
        for t in positions:
            d_h = d_out[t] + carry
            d_pre = d_h * (1.0 - hs[t] ** 2)
            grads[f"{prefix}.Wx"] += np.outer(d_pre, x[t])
            grads[f"{prefix}.b"] += d_pre
            prev_h = previous(t)
            if prev_h is not None:
                grads[f"{prefix}.Wh"] += np.outer(d_pre, prev_h)
                carry = Wh.T @ d_pre
            else:
                carry = np.zeros_like(carry)
            d_x[t] += Wx.T @ d_pre

    # ----- DBF forward/backward (stacked over a leading axis) -------------

    def _dbf_forward(self, prefix: str, layers: Array, stacked: bool):
        p = {fld: self.params[f"{prefix}.{fld}"] for fld in _DBF_FIELDS}
        if not stacked:
            p = {k: v[None] for k, v in p.items()}
        w_head = softmax(p["alpha_head"], axis=-1)  # (R, L+1)
        w_mod = softmax(p["alpha_mod"], axis=-1)
        mixed_head = np.einsum("rl,lnd->rnd", w_head, layers)
        mixed_mod = np.einsum("rl,lnd->rnd", w_mod, layers)
        pre_head = np.einsum("rhd,rnd->rnh", p["W_head"], mixed_head) + p["c_head"][:, None, :]
        pre_mod = np.einsum("rhd,rnd->rnh", p["W_mod"], mixed_mod) + p["c_mod"][:, None, :]
        v_head = np.maximum(pre_head, 0.0)
        v_mod = np.maximum(pre_mod, 0.0)
        scores = np.einsum("rih,rhk,rjk->rij", v_head, p["U"], v_mod)
        scores += np.einsum("rih,rh->ri", v_head, p["b_head"])[:, :, None]
        scores += np.einsum("rjh,rh->rj", v_mod, p["b_mod"])[:, None, :]
        scores += p["b"][:, None, None]
        cache = {
            "p": p, "w_head": w_head, "w_mod": w_mod,
            "mixed_head": mixed_head, "mixed_mod": mixed_mod,
            "pre_head": pre_head, "pre_mod": pre_mod,
            "v_head": v_head, "v_mod": v_mod, "layers": layers,
        }
        return scores, cache

    def _dbf_backward(self, prefix: str, cache: dict, d_scores: Array, stacked: bool, grads: dict):
        p = cache["p"]
        v_head, v_mod = cache["v_head"], cache["v_mod"]
        layers = cache["layers"]
        g: dict[str, Array] = {}
        row_sum = d_scores.sum(axis=2)
        col_sum = d_scores.sum(axis=1)
        d_vh = np.einsum("rij,rjk,rhk->rih", d_scores, v_mod, p["U"])
        d_vh += row_sum[:, :, None] * p["b_head"][:, None, :]
        d_vm = np.einsum("rij,rih,rhk->rjk", d_scores, v_head, p["U"])
        d_vm += col_sum[:, :, None] * p["b_mod"][:, None, :]
        g["U"] = np.einsum("rih,rij,rjk->rhk", v_head, d_scores, v_mod)
        g["b_head"] = np.einsum("rih,ri->rh", v_head, row_sum)
        g["b_mod"] = np.einsum("rjh,rj->rh", v_mod, col_sum)
        g["b"] = d_scores.sum(axis=(1, 2))
        d_layers = np.zeros_like(layers)
        for role, d_v in (("head", d_vh), ("mod", d_vm)):
            pre = cache[f"pre_{role}"]
            mixed = cache[f"mixed_{role}"]
            w = cache[f"w_{role}"]
            W = p[f"W_{role}"]
            d_pre = d_v * (pre > 0)
            g[f"W_{role}"] = np.einsum("rnh,rnd->rhd", d_pre, mixed)
            g[f"c_{role}"] = d_pre.sum(axis=1)
            d_mixed = np.einsum("rnh,rhd->rnd", d_pre, W)
            t = np.einsum("rnd,lnd->rl", d_mixed, layers)
            g[f"alpha_{role}"] = w * (t - (w * t).sum(axis=-1, keepdims=True))
            d_layers += np.einsum("rl,rnd->lnd", w, d_mixed)
        for fld in _DBF_FIELDS:
            update = g[fld] if stacked else g[fld][0].reshape(self.params[f"{prefix}.{fld}"].shape)
            grads[f"{prefix}.{fld}"] += update
        return d_layers

    # ----- scoring ---------------------------------------------------------

    def score_sentence(self, words: list[str]) -> SentenceScores:
        layers, _ = self._encode_forward(words)
        tree, _ = self._dbf_forward("tree", layers, stacked=False)
        graph, _ = self._dbf_forward("graph", layers, stacked=False)
        rel, _ = self._dbf_forward("rel", layers, stacked=True)
        return SentenceScores(
            tree=tree[0][:, 1:],
            graph=graph[0][:, 1:],
            rel=np.moveaxis(rel, 0, -1)[:, 1:, :],
        )

    # ----- loss -------------------------------------------------------------

    def loss(self, example: TrainExample) -> tuple[float, dict[str, Array]]:
        """Summed cross-entropy loss and gradients for every parameter.

        Components: softmax cross-entropy over heads for each word (when
        a spanning tree is available), binary cross-entropy over the
        candidate pair set for the edge predictor, and softmax
        cross-entropy over labels for every gold edge.
        """
        n = len(example.words)
        layers, enc_cache = self._encode_forward(example.words)
        tree_s, tree_cache = self._dbf_forward("tree", layers, stacked=False)
        graph_s, graph_cache = self._dbf_forward("graph", layers, stacked=False)
        rel_s, rel_cache = self._dbf_forward("rel", layers, stacked=True)
        tree_s = tree_s[0]
        graph_s = graph_s[0]

        total = 0.0
        d_tree = np.zeros_like(tree_s)
        d_graph = np.zeros_like(graph_s)
        d_rel = np.zeros_like(rel_s)

        if example.tree_heads is not None:
            if len(example.tree_heads) != n:
                raise ValueError("tree_heads length mismatch")
            for j in range(1, n + 1):
                gold = example.tree_heads[j - 1]
                logp = log_softmax(tree_s[:, j])
                total -= logp[gold]
                d_tree[:, j] += np.exp(logp)
                d_tree[gold, j] -= 1.0

        mask = np.zeros_like(graph_s, dtype=bool)
        mask[:, 1:] = True
        np.fill_diagonal(mask, False)
        for i, j in example.exclude_pairs:
            mask[i, j] = False
        y = np.zeros_like(graph_s)
        for i, j in example.graph_targets:
            if not mask[i, j]:
                raise ValueError(f"graph target ({i}, {j}) outside the candidate set")
            y[i, j] = 1.0
        s = graph_s[mask]
        t = y[mask]
        total += float(np.sum(np.maximum(s, 0.0) - s * t + np.log1p(np.exp(-np.abs(s)))))
        sig = 1.0 / (1.0 + np.exp(-graph_s))
        d_graph[mask] = (sig - y)[mask]

        n_labels = len(self.label_vocab)
        for i, j, r in example.gold_edges:
            if not (0 <= r < n_labels):
                raise ValueError(f"label id {r} outside the closed vocabulary")
            logits = rel_s[:, i, j]
            logp = log_softmax(logits)
            total -= logp[r]
            d_rel[:, i, j] += np.exp(logp)
            d_rel[r, i, j] -= 1.0

        grads = self.zero_grads()
        d_layers = self._dbf_backward("tree", tree_cache, d_tree[None], False, grads)
        d_layers += self._dbf_backward("graph", graph_cache, d_graph[None], False, grads)
        d_layers += self._dbf_backward("rel", rel_cache, d_rel, True, grads)
        self._encode_backward(layers, enc_cache, d_layers, grads)
        return float(total), grads


# ----- serialization ---------------------------------------------------------


def save_model(model: ScoreModel, path) -> None:
    if not model.label_vocab:
        raise ModelFormatError("refusing to save a model with an empty label vocabulary")
    order = [[name, list(arr.shape)] for name, arr in model.named_parameters()]
    header = {
        "config": asdict(model.config),
        "vocab": model.vocab,
        "label_vocab": model.label_vocab,
        "mode": model.mode,
        "params": order,
    }
    blob = json.dumps(header, ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as handle:
        handle.write(MAGIC)
        handle.write(struct.pack("<I", FORMAT_VERSION))
        handle.write(struct.pack("<Q", len(blob)))
        handle.write(blob)
        for _, arr in model.named_parameters():
            handle.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_model(path) -> ScoreModel:
    with open(path, "rb") as handle:
        magic = handle.read(4)
        if magic != MAGIC:
            raise ModelFormatError(f"bad magic bytes {magic!r}")
        raw = handle.read(4)
        if len(raw) < 4:
            raise ModelFormatError("truncated file (missing version)")
        (version,) = struct.unpack("<I", raw)
        if version != FORMAT_VERSION:
            raise ModelFormatError(f"unsupported format version {version}")
        raw = handle.read(8)
        if len(raw) < 8:
            raise ModelFormatError("truncated file (missing header length)")
        (header_len,) = struct.unpack("<Q", raw)
        blob = handle.read(header_len)
        if len(blob) < header_len:
            raise ModelFormatError("truncated file (incomplete header)")
        try:
            header = json.loads(blob.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ModelFormatError(f"corrupt header: {exc}")
        if not header.get("label_vocab"):
            raise ModelFormatError("model has an empty label vocabulary")
        config = ModelConfig(**header["config"])
        params: dict[str, Array] = {}
        for name, shape in header["params"]:
            count = int(np.prod(shape)) if shape else 1
            raw = handle.read(count * 8)
            if len(raw) < count * 8:
                raise ModelFormatError(f"truncated file (parameter {name})")
            params[name] = np.frombuffer(raw, dtype="<f8").astype(
                np.float64, copy=True
            ).reshape(shape)
        if handle.read(1):
            raise ModelFormatError("trailing bytes after final parameter block")
    return ScoreModel(
        config=config,
        vocab=header["vocab"],
        label_vocab=header["label_vocab"],
        params=params,
        mode=header.get("mode", "tree-graph"),
    )
