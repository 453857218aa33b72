"""Feature-sequence files, manifests and the synthetic gesture generator.

Feature file layout (little-endian)::

    b"MWFS"  u32 version  u32 m  u32 d_in  u32 name_len  name(utf-8)  i32 label
    float64[m * d_in] payload, row-major

A manifest is a text file with one ``path,label,modality`` line per file;
relative paths resolve against the manifest's directory.
"""

import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, InputError, LengthError

MAGIC = b"MWFS"
VERSION = 1
MODALITY_NAMES = ("color", "depth", "ir", "normals", "flow")


@dataclass
class FeatureSequence:
    features: np.ndarray   # (m, d_in) float64
    modality: str = ""
    label: int = -1        # -1 means unlabelled

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            raise InputError(f"features must be (m, d_in), got shape {self.features.shape}")


def save_features(path, seq):
    m, d = seq.features.shape
    name = seq.modality.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIII", VERSION, m, d, len(name)))
        fh.write(name)
        fh.write(struct.pack("<i", seq.label))
        fh.write(seq.features.astype("<f8", copy=False).tobytes(order="C"))


def load_features(path):
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic, not a feature-sequence file", offset=0)
    if len(buf) < 20:
        raise LengthError(f"{path}: header", 20, len(buf), offset=0)
    version, m, d, name_len = struct.unpack_from("<IIII", buf, 4)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}", offset=4)
    pos = 20
    if len(buf) < pos + name_len + 4:
        raise LengthError(f"{path}: header", pos + name_len + 4, len(buf), offset=pos)
    modality = buf[pos:pos + name_len].decode("utf-8")
    pos += name_len
    (label,) = struct.unpack_from("<i", buf, pos)
    pos += 4
    expected = 8 * m * d
    actual = len(buf) - pos
    if actual != expected:
        raise LengthError(f"{path}: payload", expected, actual, offset=pos)
    feats = np.frombuffer(buf, dtype="<f8", count=m * d, offset=pos).astype(np.float64).reshape(m, d)
    return FeatureSequence(feats, modality, label)


@dataclass
class ManifestEntry:
    path: Path
    label: int
    modality: str

    @property
    def sample_id(self):
        stem = self.path.stem
        suffix = f"_{self.modality}"
        return stem[: -len(suffix)] if self.modality and stem.endswith(suffix) else stem


def read_manifest(path):
    path = Path(path)
    base = path.parent
    entries = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise InputError(f"{path}:{lineno}: expected 'path,label,modality', got {line!r}")
            try:
                label = int(parts[1])
            except ValueError:
                raise InputError(f"{path}:{lineno}: label {parts[1]!r} is not an integer") from None
            entries.append(ManifestEntry(base / parts[0], label, parts[2]))
    return entries


def write_manifest(path, rows):
    with open(path, "w") as fh:
        for rel, label, modality in rows:
            fh.write(f"{rel},{label},{modality}\n")


def load_split(manifest, modality=None):
    """Stack one modality of a manifest into arrays.

    Returns ``(features (N, m, d_in), labels (N,), sample_ids)`` in manifest order.
    With ``modality=None`` the manifest must hold exactly one modality.
    """
    entries = read_manifest(manifest)
    present = sorted({e.modality for e in entries})
    if modality is None:
        if len(present) != 1:
            raise InputError(f"{manifest}: holds modalities {present}; choose one")
        modality = present[0]
    chosen = [e for e in entries if e.modality == modality]
    if not chosen:
        raise InputError(f"{manifest}: no entries for modality {modality!r} (have {present})")
    seqs = [load_features(e.path) for e in chosen]
    shapes = {s.features.shape for s in seqs}
    if len(shapes) != 1:
        raise InputError(f"{manifest}: inconsistent feature shapes {sorted(shapes)}")
    x = np.stack([s.features for s in seqs])
    y = np.array([e.label for e in chosen], dtype=np.int64)
    return x, y, [e.sample_id for e in chosen]


# -- synthetic data ------------------------------------------------------------

@dataclass
class SyntheticSpec:
    n: int = 3            # classes
    m: int = 40           # frames
    d_in: int = 16
    modalities: int = 1
    sigma: float = 0.3    # noise standard deviation
    seed: int = 0
    n_train: int = 240
    n_test: int = 60

    def __post_init__(self):
        if self.n < 2:
            raise InputError(f"need at least 2 classes, got {self.n}")
        if self.sigma < 0:
            raise InputError(f"noise sigma must be >= 0, got {self.sigma}")
        if self.modalities < 1 or self.m < 2 or self.d_in < 1:
            raise InputError("modalities >= 1, m >= 2 and d_in >= 1 required")


@dataclass
class SyntheticDataset:
    spec: SyntheticSpec
    modalities: list
    prototypes: dict                       # modality -> (n, m, d_in)
    train_x: dict = field(default_factory=dict)   # modality -> (N, m, d_in)
    train_y: np.ndarray = None
    test_x: dict = field(default_factory=dict)
    test_y: np.ndarray = None


def modality_names(count):
    return [MODALITY_NAMES[i] if i < len(MODALITY_NAMES) else f"mod{i}" for i in range(count)]


def _balanced_labels(rng, count, n):
    labels = np.arange(count) % n
    rng.shuffle(labels)
    return labels


def gen_synthetic(spec):
    """Class prototypes are smooth sinusoids with class-specific frequency and
    phase per feature; each modality sees its own fixed linear distortion of the
    prototype, plus independent Gaussian noise per sample.
    """
    rng = np.random.default_rng(spec.seed)
    n, m, d = spec.n, spec.m, spec.d_in
    freq = rng.uniform(0.5, 3.0, size=(n, d))            # cycles per sequence
    phase = rng.uniform(0.0, 2.0 * np.pi, size=(n, d))
    t = np.arange(m, dtype=np.float64)[None, :, None]
    base = np.sin(2.0 * np.pi * freq[:, None, :] * t / m + phase[:, None, :])  # (n, m, d)

    names = modality_names(spec.modalities)
    protos = {}
    for name in names:
        mix = rng.normal(size=(d, d)) / np.sqrt(d) + np.eye(d)
        offset = rng.normal(scale=0.5, size=d)
        protos[name] = base @ mix + offset

    train_y = _balanced_labels(rng, spec.n_train, n)
    test_y = _balanced_labels(rng, spec.n_test, n)
    ds = SyntheticDataset(spec, names, protos, train_y=train_y, test_y=test_y)
    for split, labels, out in (("train", train_y, ds.train_x), ("test", test_y, ds.test_x)):
        for name in names:
            noise = rng.normal(scale=1.0, size=(labels.size, m, d))
            out[name] = protos[name][labels] + spec.sigma * noise
    return ds


def write_dataset(ds, out_dir):
    """Write feature files plus ``train.manifest`` / ``test.manifest``. Returns manifest paths."""
    out_dir = Path(out_dir)
    feat_dir = out_dir / "features"
    feat_dir.mkdir(parents=True, exist_ok=True)
    manifests = {}
    for split, xs, ys in (("train", ds.train_x, ds.train_y), ("test", ds.test_x, ds.test_y)):
        rows = []
        for i, label in enumerate(ys):
            for name in ds.modalities:
                rel = os.path.join("features", f"{split}_{i:05d}_{name}.mwfs")
                save_features(out_dir / rel, FeatureSequence(xs[name][i], name, int(label)))
                rows.append((rel, int(label), name))
        manifests[split] = out_dir / f"{split}.manifest"
        write_manifest(manifests[split], rows)
    return manifests


def nearest_prototype(x, prototypes):
    """Index of the closest prototype (squared Euclidean) for each sample in x (N, m, d)."""
    dist = ((x[:, None, :, :] - prototypes[None, :, :, :]) ** 2).sum(axis=(2, 3))
    return np.argmin(dist, axis=1)
