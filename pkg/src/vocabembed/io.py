"""File formats: word vectors, features, labels, frequency tables, models.

All binary integers and floats are little-endian.

word2vec text
    ``<count> <dim>`` header, then ``<token> <v1> ... <vdim>`` per line.
word2vec binary
    the same ASCII header line, then per entry the token bytes, one space,
    and ``dim`` float32 values.
features (binary)
    ``VIFM``, uint32 N, uint32 p, then N*p float32 row-major.
features (CSV)
    no header, p comma-separated decimals per line.
labels
    one UTF-8 label per line.
frequency table
    ``<token>\\t<count>`` per line.
synsets
    ``<label>\\t<synonym>\\t<synonym>...`` per line.
model
    ``VEMD``, uint32 version, uint32 header length, UTF-8 JSON header,
    then p*d float64 values of W row-major.
"""

import hashlib
import json
import struct
import warnings

import numpy as np

from .core import LabeledFeatures, SemanticVocabulary
from .errors import DataFormatError, ModelMismatchError
from .evt import ClassWeights
from .loss import LossConfig
from .recognition import rocchio_prototype

FEATURE_MAGIC = b"VIFM"
MODEL_MAGIC = b"VEMD"
MODEL_VERSION = 1


class DuplicateLabelWarning(UserWarning):
    pass


def _parse_header(line, path):
    parts = line.split()
    if len(parts) != 2:
        raise DataFormatError(f"{path}: malformed header {line.strip()!r}")
    try:
        count, dim = int(parts[0]), int(parts[1])
    except ValueError:
        raise DataFormatError(f"{path}: malformed header {line.strip()!r}") from None
    if count < 0 or dim < 1:
        raise DataFormatError(f"{path}: header counts out of range: {count} {dim}")
    return count, dim


def _assemble(path, tokens, rows, dim, normalize, source_labels, target_labels):
    # duplicates: first position, last vector
    pos, labels, vecs = {}, [], []
    dups = 0
    for tok, vec in zip(tokens, rows):
        if tok in pos:
            dups += 1
            vecs[pos[tok]] = vec
        else:
            pos[tok] = len(labels)
            labels.append(tok)
            vecs.append(vec)
    if dups:
        warnings.warn(f"{path}: {dups} duplicate labels (last occurrence kept)",
                      DuplicateLabelWarning, stacklevel=3)
    V = np.array(vecs, dtype=np.float64).reshape(len(labels), dim)
    if not np.all(np.isfinite(V)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(V), axis=1))[0])
        raise DataFormatError(f"{path}: non-finite value in vector for {labels[bad]!r}")

    def resolve(names, kind):
        out = []
        for name in names or ():
            if name not in pos:
                raise DataFormatError(f"{path}: {kind} label {name!r} not in vocabulary")
            out.append(pos[name])
        return out

    return SemanticVocabulary(labels, V, resolve(source_labels, "source"),
                              resolve(target_labels, "target"), normalize=normalize)


def load_word_vectors(path, format="text", *, normalize=True, no_header=False,
                      source_labels=None, target_labels=None):
    """Read a word-vector file into a SemanticVocabulary (file row order kept).

    ``no_header`` accepts header-less text files (GloVe); the dimension is
    then taken from the first row.
    """
    if format == "binary":
        return _load_binary(path, normalize, source_labels, target_labels)
    if format != "text":
        raise ValueError(f"unknown word-vector format {format!r}")
    tokens, rows = [], []
    with open(path, encoding="utf-8") as fh:
        if no_header:
            count, dim = None, None
            start = 1
        else:
            count, dim = _parse_header(fh.readline(), path)
            start = 2
        for lineno, line in enumerate(fh, start=start):
            parts = line.split()
            if not parts:
                continue
            if dim is None:
                dim = len(parts) - 1
                if dim < 1:
                    raise DataFormatError(f"{path}:{lineno}: row has no vector values")
            if len(parts) != dim + 1:
                raise DataFormatError(f"{path}:{lineno}: expected {dim} values, got {len(parts) - 1}")
            try:
                vec = [float(v) for v in parts[1:]]
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: unparseable value") from None
            if not all(np.isfinite(vec)):
                raise DataFormatError(f"{path}:{lineno}: non-finite value")
            tokens.append(parts[0])
            rows.append(vec)
    if dim is None:
        raise DataFormatError(f"{path}: empty header-less file")
    if count is not None and count != len(tokens):
        raise DataFormatError(f"{path}: header declares {count} rows, found {len(tokens)}")
    return _assemble(path, tokens, rows, dim, normalize, source_labels, target_labels)


def _load_binary(path, normalize, source_labels, target_labels):
    with open(path, "rb") as fh:
        data = fh.read()
    nl = data.find(b"\n")
    if nl < 0:
        raise DataFormatError(f"{path}: missing header line")
    count, dim = _parse_header(data[:nl].decode("ascii", "replace"), path)
    off = nl + 1
    width = 4 * dim
    tokens, rows = [], []
    for entry in range(count):
        while off < len(data) and data[off:off + 1] == b"\n":
            off += 1
        sp = data.find(b" ", off)
        if sp < 0 or sp + 1 + width > len(data):
            raise DataFormatError(f"{path}: truncated at entry {entry}")
        tokens.append(data[off:sp].decode("utf-8"))
        vec = np.frombuffer(data, dtype="<f4", count=dim, offset=sp + 1)
        if not np.all(np.isfinite(vec)):
            raise DataFormatError(f"{path}: non-finite value in entry {entry}")
        rows.append(vec.astype(np.float64))
        off = sp + 1 + width
    return _assemble(path, tokens, rows, dim, normalize, source_labels, target_labels)


def write_word_vectors(path, vocab, format="text"):
    """Write vectors as float32, exactly representable on reload."""
    V = vocab.vectors.astype("<f4")
    n, d = V.shape
    if format == "text":
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{n} {d}\n")
            for label, row in zip(vocab.labels, V):
                fh.write(label + " " + " ".join(repr(float(v)) for v in row) + "\n")
    elif format == "binary":
        with open(path, "wb") as fh:
            fh.write(f"{n} {d}\n".encode("ascii"))
            for label, row in zip(vocab.labels, V):
                fh.write(label.encode("utf-8") + b" " + row.tobytes())
    else:
        raise ValueError(f"unknown word-vector format {format!r}")


def read_label_file(path):
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n").rstrip("\r") for line in fh if line.strip()]


def write_label_file(path, labels):
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(f"{s}\n" for s in labels)


def read_frequency_table(path):
    freq = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            tok, sep, count = line.rstrip("\n").rpartition("\t")
            try:
                c = int(count)
            except ValueError:
                c = -1
            if not sep or c < 0:
                raise DataFormatError(f"{path}:{lineno}: expected '<token>\\t<count>'")
            freq[tok] = c
    return freq


def read_synsets(path):
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = [p for p in line.rstrip("\n").split("\t") if p]
            if parts:
                out[parts[0]] = parts[1:]
    return out


def prune_vocabulary(vocab, freq, min_count=300, max_count=10_000_000):
    """Keep labels whose corpus count lies in [min_count, max_count].

    Labels missing from ``freq`` are dropped; source and target classes are
    always kept.
    """
    protected = set(vocab.source_ids.tolist()) | set(vocab.target_ids.tolist())
    keep = [i for i, label in enumerate(vocab.labels)
            if i in protected or min_count <= freq.get(label, -1) <= max_count]
    return vocab.subset(keep)


def lookup_phrase(vocab, phrase):
    """Vector for a word or phrase.

    Exact label first, then the underscore- and space-joined variants, then
    the (Rocchio) mean of the whitespace-separated tokens.
    """
    if phrase in vocab:
        return vocab.vectors[vocab.index(phrase)]
    tokens = phrase.split()
    for variant in ("_".join(tokens), " ".join(phrase.split("_"))):
        if variant in vocab:
            return vocab.vectors[vocab.index(variant)]
    missing = [t for t in tokens if t not in vocab]
    if not tokens or missing:
        raise KeyError(f"out-of-vocabulary token(s) in {phrase!r}: {missing or [phrase]}")
    rows = [vocab.index(t) for t in tokens]
    return rocchio_prototype(vocab.vectors[rows], vocab.normalized)


def read_features(path):
    """Features from the binary format (by magic) or CSV."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == FEATURE_MAGIC:
        with open(path, "rb") as fh:
            data = fh.read()
        if len(data) < 12:
            raise DataFormatError(f"{path}: truncated feature header")
        n, p = struct.unpack_from("<II", data, 4)
        if len(data) != 12 + 4 * n * p:
            raise DataFormatError(f"{path}: expected {n}x{p} floats, file size {len(data)}")
        X = np.frombuffer(data, dtype="<f4", count=n * p, offset=12).reshape(n, p)
        X = X.astype(np.float64)
    else:
        rows = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    rows.append([float(v) for v in line.split(",")])
                except ValueError:
                    raise DataFormatError(f"{path}:{lineno}: unparseable value") from None
                if len(rows[-1]) != len(rows[0]):
                    raise DataFormatError(f"{path}:{lineno}: expected {len(rows[0])} columns")
        X = np.array(rows, dtype=np.float64).reshape(len(rows), -1 if rows else 0)
    if not np.all(np.isfinite(X)):
        raise DataFormatError(f"{path}: non-finite feature value")
    return X


def write_features(path, X, format="binary"):
    X = np.asarray(X, dtype=np.float64)
    if format == "binary":
        with open(path, "wb") as fh:
            fh.write(FEATURE_MAGIC + struct.pack("<II", *X.shape))
            fh.write(X.astype("<f4").tobytes())
    elif format == "csv":
        with open(path, "w", encoding="utf-8") as fh:
            for row in X.astype(np.float32):
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
    else:
        raise ValueError(f"unknown feature format {format!r}")


def load_features(features_path, labels_path, vocab, allowed="source"):
    """Features plus labels resolved to vocabulary rows.

    ``allowed`` restricts labels to ``"source"`` classes, ``"known"``
    (source or target) or ``"any"`` vocabulary row.
    """
    X = read_features(features_path)
    names = read_label_file(labels_path)
    if len(names) != X.shape[0]:
        raise DataFormatError(f"{features_path} has {X.shape[0]} rows but {labels_path} "
                              f"has {len(names)} labels")
    if allowed == "source":
        valid = set(vocab.source_ids.tolist())
    elif allowed == "known":
        valid = set(vocab.source_ids.tolist()) | set(vocab.target_ids.tolist())
    else:
        valid = None
    ids = []
    for name in names:
        if name not in vocab or (valid is not None and vocab.index(name) not in valid):
            raise DataFormatError(f"{labels_path}: label {name!r} is not a {allowed} class")
        ids.append(vocab.index(name))
    return LabeledFeatures(X, np.array(ids, dtype=np.int64))


def vocab_fingerprint(vocab):
    """SHA-256 over labels, vectors, class splits and the normalization flag."""
    h = hashlib.sha256()
    h.update(f"{len(vocab)} {vocab.dim} {int(vocab.normalized)}\n".encode())
    for label in vocab.labels:
        h.update(label.encode("utf-8") + b"\n")
    h.update(np.ascontiguousarray(vocab.vectors, dtype="<f8").tobytes())
    h.update(np.asarray(vocab.source_ids, dtype="<i8").tobytes())
    h.update(b"|")
    h.update(np.asarray(vocab.target_ids, dtype="<i8").tobytes())
    return h.hexdigest()


class ModelFile:
    """A trained embedding with its weights, loss settings and vocabulary fingerprint."""

    def __init__(self, W, weights, loss_cfg, fingerprint, version=MODEL_VERSION, extra=None):
        self.W = np.asarray(W, dtype=np.float64)
        self.weights = weights
        self.loss_cfg = loss_cfg
        self.fingerprint = fingerprint
        self.version = version
        self.extra = dict(extra or {})

    def check_vocab(self, vocab):
        fp = vocab_fingerprint(vocab)
        if fp != self.fingerprint:
            raise ModelMismatchError("vocabulary fingerprint does not match the model "
                                     f"(model {self.fingerprint[:12]}, vocabulary {fp[:12]})")


def save_model(path, model):
    header = {
        "version": model.version,
        "shape": list(model.W.shape),
        "fingerprint": model.fingerprint,
        "loss": model.loss_cfg.to_dict(),
        "weights": model.weights.to_dict(),
        "extra": model.extra,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC + struct.pack("<II", model.version, len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(model.W, dtype="<f8").tobytes())


def load_model(path, vocab=None):
    """Read a model file; with ``vocab`` also verify the fingerprint."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 12 or data[:4] != MODEL_MAGIC:
        raise DataFormatError(f"{path}: not a model file")
    version, hlen = struct.unpack_from("<II", data, 4)
    if version != MODEL_VERSION:
        raise ModelMismatchError(f"{path}: unsupported model version {version}")
    if len(data) < 12 + hlen:
        raise DataFormatError(f"{path}: truncated model header")
    try:
        header = json.loads(data[12:12 + hlen].decode("utf-8"))
    except ValueError:
        raise DataFormatError(f"{path}: corrupt model header") from None
    p, d = header["shape"]
    body = data[12 + hlen:]
    if len(body) != 8 * p * d:
        raise DataFormatError(f"{path}: truncated model body")
    W = np.frombuffer(body, dtype="<f8").reshape(p, d).astype(np.float64)
    model = ModelFile(W, ClassWeights.from_dict(header["weights"]),
                      LossConfig(**header["loss"]), header["fingerprint"], version,
                      header.get("extra"))
    if vocab is not None:
        model.check_vocab(vocab)
    return model
