"""Dataset format, splits, label noise, and the synthetic drift generator.

On disk a dataset is a JSON manifest plus one shard per month. Shards are
either CSV (``id,label,f0..f{d-1}``) or a compact packed-bit binary
layout; both readers are supported and the writer defaults to binary.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"BFVS"
BINARY_VERSION = 1
MANIFEST_VERSION = 1


class DataError(ValueError):
    pass


@dataclass
class FeatureRecord:
    id: str
    month: str  # YYYY-MM
    label: int  # 0 benign, 1 malware
    features: np.ndarray  # uint8 {0,1} vector
    family: str = ""  # reserved; no operation consumes it


@dataclass
class Dataset:
    name: str
    feature_dim: int
    records: list = field(default_factory=list)

    def months(self):
        return sorted({r.month for r in self.records})

    def by_month(self):
        out = {}
        for r in self.records:
            out.setdefault(r.month, []).append(r)
        return {m: out[m] for m in sorted(out)}

    def to_arrays(self):
        """(X uint8 matrix, y int vector, ids list), record order preserved."""
        if not self.records:
            return (
                np.zeros((0, self.feature_dim), dtype=np.uint8),
                np.zeros(0, dtype=np.int64),
                [],
            )
        X = np.stack([r.features for r in self.records])
        y = np.array([r.label for r in self.records], dtype=np.int64)
        return X, y, [r.id for r in self.records]

    def subset(self, indices):
        return Dataset(self.name, self.feature_dim, [self.records[i] for i in indices])


def _check_month(month):
    parts = month.split("-")
    if len(parts) != 2 or len(parts[0]) != 4:
        raise DataError(f"month {month!r} is not YYYY-MM")
    try:
        y, m = int(parts[0]), int(parts[1])
    except ValueError:
        raise DataError(f"month {month!r} is not YYYY-MM") from None
    if not 1 <= m <= 12:
        raise DataError(f"month {month!r} has invalid month number")
    return y, m


def month_range(start, end):
    """All YYYY-MM strings from start to end inclusive."""
    y0, m0 = _check_month(start)
    y1, m1 = _check_month(end)
    if (y0, m0) > (y1, m1):
        raise DataError(f"month range {start}..{end} is reversed")
    out = []
    y, m = y0, m0
    while (y, m) <= (y1, m1):
        out.append(f"{y:04d}-{m:02d}")
        m += 1
        if m == 13:
            y, m = y + 1, 1
    return out


def parse_period(period):
    """Parse 'YYYY-MM..YYYY-MM' (or a single 'YYYY-MM') into a month list."""
    if ".." in period:
        start, end = period.split("..", 1)
        return month_range(start, end)
    _check_month(period)
    return [period]


# ---------------------------------------------------------------------------
# on-disk format
# ---------------------------------------------------------------------------


def _shard_bytes_binary(records, dim):
    buf = bytearray()
    buf += MAGIC
    buf += struct.pack("<III", BINARY_VERSION, dim, len(records))
    for r in records:
        rid = r.id.encode()
        buf += struct.pack("<BH", r.label, len(rid))
        buf += rid
        buf += np.packbits(r.features).tobytes()
    return bytes(buf)


def _read_shard_binary(raw, month, dim, path):
    if raw[:4] != MAGIC:
        raise DataError(f"shard {path} has bad magic bytes")
    version, d, count = struct.unpack("<III", raw[4:16])
    if version != BINARY_VERSION:
        raise DataError(f"shard {path} has unsupported version {version}")
    if d != dim:
        raise DataError(f"shard {path} has dim {d}, manifest expects {dim}")
    nbytes = (d + 7) // 8
    off = 16
    records = []
    for _ in range(count):
        label, idlen = struct.unpack_from("<BH", raw, off)
        off += 3
        rid = raw[off : off + idlen].decode()
        off += idlen
        bits = np.unpackbits(np.frombuffer(raw, np.uint8, nbytes, off))[:d]
        off += nbytes
        records.append(FeatureRecord(rid, month, int(label), bits.astype(np.uint8)))
    return records


def _shard_bytes_csv(records, dim):
    lines = ["id,label," + ",".join(f"f{i}" for i in range(dim))]
    for r in records:
        lines.append(f"{r.id},{r.label}," + ",".join(str(int(v)) for v in r.features))
    return ("\n".join(lines) + "\n").encode()


def _read_shard_csv(raw, month, dim, path):
    lines = raw.decode().splitlines()
    header = lines[0].split(",")
    if len(header) != dim + 2:
        raise DataError(f"shard {path} has {len(header) - 2} features, expects {dim}")
    records = []
    for line in lines[1:]:
        cells = line.split(",")
        bits = np.array(cells[2:], dtype=np.uint8)
        if len(bits) != dim:
            raise DataError(f"shard {path} row has dim {len(bits)}, expects {dim}")
        records.append(FeatureRecord(cells[0], month, int(cells[1]), bits))
    return records


def save_dataset(dataset, path, fmt="binary"):
    """Write manifest + per-month shards under ``path``."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    shards = []
    for month, records in dataset.by_month().items():
        if fmt == "binary":
            raw = _shard_bytes_binary(records, dataset.feature_dim)
            fname = f"{month}.bfv"
        else:
            raw = _shard_bytes_csv(records, dataset.feature_dim)
            fname = f"{month}.csv"
        (path / fname).write_bytes(raw)
        shards.append(
            {
                "month": month,
                "file": fname,
                "format": fmt,
                "sha256": hashlib.sha256(raw).hexdigest(),
                "benign": sum(1 for r in records if r.label == 0),
                "malware": sum(1 for r in records if r.label == 1),
            }
        )
    manifest = {
        "version": MANIFEST_VERSION,
        "name": dataset.name,
        "feature_dim": dataset.feature_dim,
        "shards": shards,
    }
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return path


def load_dataset(path):
    """Read and validate a dataset directory; returns (manifest, Dataset)."""
    path = Path(path)
    mpath = path / "manifest.json"
    if not mpath.exists():
        raise DataError(f"no manifest.json under {path}")
    manifest = json.loads(mpath.read_text())
    if manifest.get("version") != MANIFEST_VERSION:
        raise DataError(f"unsupported manifest version {manifest.get('version')}")
    dim = manifest["feature_dim"]
    dataset = Dataset(manifest["name"], dim)
    for shard in manifest["shards"]:
        month = shard["month"]
        _check_month(month)
        raw = (path / shard["file"]).read_bytes()
        digest = hashlib.sha256(raw).hexdigest()
        if digest != shard["sha256"]:
            raise DataError(f"shard {shard['file']} failed checksum validation")
        if shard["format"] == "binary":
            records = _read_shard_binary(raw, month, dim, shard["file"])
        else:
            records = _read_shard_csv(raw, month, dim, shard["file"])
        benign = sum(1 for r in records if r.label == 0)
        if benign != shard["benign"] or len(records) - benign != shard["malware"]:
            raise DataError(f"shard {shard['file']} counts disagree with manifest")
        dataset.records.extend(records)
    return manifest, dataset


# ---------------------------------------------------------------------------
# splits
# ---------------------------------------------------------------------------


def temporal_split(dataset, train_period, val_period, test_period):
    """Partition by month into train/val/test; periods must not overlap."""
    periods = [parse_period(p) if p else [] for p in
               (train_period, val_period, test_period)]
    seen = {}
    for name, months in zip(("train", "val", "test"), periods):
        for m in months:
            if m in seen:
                raise DataError(f"month {m} appears in both {seen[m]} and {name}")
            seen[m] = name
    sets = {"train": [], "val": [], "test": []}
    for r in dataset.records:
        bucket = seen.get(r.month)
        if bucket:
            sets[bucket].append(r)
    return tuple(
        Dataset(f"{dataset.name}-{k}", dataset.feature_dim, sets[k])
        for k in ("train", "val", "test")
    )


def label_ratio_split(train, ratio, seed):
    """Stratified labeled/unlabeled split with |D_l| = round(ratio * N)."""
    if not 0.0 <= ratio <= 1.0:
        raise DataError(f"label ratio {ratio} outside [0, 1]")
    n = len(train.records)
    target = int(round(ratio * n))
    rng = np.random.default_rng(seed)
    by_class = {0: [], 1: []}
    for i, r in enumerate(train.records):
        by_class[r.label].append(i)
    labeled = []
    # largest-remainder apportionment keeps class proportions within one sample
    quotas = {}
    for c, idxs in by_class.items():
        quotas[c] = target * len(idxs) / n if n else 0.0
    take = {c: int(np.floor(q)) for c, q in quotas.items()}
    rem = target - sum(take.values())
    for c in sorted(quotas, key=lambda c: quotas[c] - take[c], reverse=True):
        if rem <= 0:
            break
        if take[c] < len(by_class[c]):
            take[c] += 1
            rem -= 1
    for c, idxs in by_class.items():
        chosen = rng.permutation(len(idxs))[: take[c]]
        labeled.extend(idxs[i] for i in chosen)
    labeled = sorted(labeled)
    unlabeled = sorted(set(range(n)) - set(labeled))
    return train.subset(labeled), train.subset(unlabeled)


def inject_label_noise(labeled, noise_rate, seed):
    """Flip exactly round(rate * N) labels, chosen without replacement."""
    if not 0.0 <= noise_rate <= 1.0:
        raise DataError(f"noise rate {noise_rate} outside [0, 1]")
    n = len(labeled.records)
    flips = int(round(noise_rate * n))
    rng = np.random.default_rng(seed)
    chosen = set(rng.choice(n, size=flips, replace=False)) if flips else set()
    records = []
    for i, r in enumerate(labeled.records):
        label = 1 - r.label if i in chosen else r.label
        records.append(FeatureRecord(r.id, r.month, label, r.features, r.family))
    return Dataset(labeled.name, labeled.feature_dim, records)


# ---------------------------------------------------------------------------
# synthetic drift stream
# ---------------------------------------------------------------------------


@dataclass
class DriftGeneratorConfig:
    dim: int = 200
    months: int = 12
    samples_per_month_per_class: int = 500
    drift_rate: float = 0.15  # per-month chance a feature's rate is resampled
    overlap: float = 0.3  # fraction of features sharing one rate across classes
    start_month: str = "2020-01"
    prob_low: float = 0.02
    prob_high: float = 0.85
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.drift_rate <= 1.0:
            raise DataError("drift_rate must be in [0, 1]")
        if not 0.0 <= self.overlap <= 1.0:
            raise DataError("overlap must be in [0, 1]")


def synth_drift_generate(cfg):
    """Covariate-drift stream of binary vectors.

    Each class has a per-feature Bernoulli rate vector. A fraction
    ``overlap`` of features share one rate across classes (uninformative);
    the rest are class-specific. Between months every rate is resampled
    independently with probability ``drift_rate``, shifting P(X) while
    the labeling rule stays tied to the current rates.
    """
    rng = np.random.default_rng(cfg.seed)
    d = cfg.dim
    n_shared = int(round(cfg.overlap * d))
    shared = rng.permutation(d)[:n_shared]
    shared_mask = np.zeros(d, dtype=bool)
    shared_mask[shared] = True

    def draw_rates(size):
        return rng.uniform(cfg.prob_low, cfg.prob_high, size=size)

    theta = np.stack([draw_rates(d), draw_rates(d)])  # [class, feature]
    theta[1, shared_mask] = theta[0, shared_mask]

    month_names = []
    y, m = _check_month(cfg.start_month)
    for _ in range(cfg.months):
        month_names.append(f"{y:04d}-{m:02d}")
        m += 1
        if m == 13:
            y, m = y + 1, 1

    dataset = Dataset(f"synth-drift-{cfg.seed}", d)
    counter = 0
    for t, month in enumerate(month_names):
        if t > 0:
            moved = rng.random(d) < cfg.drift_rate
            fresh0 = draw_rates(d)
            fresh1 = draw_rates(d)
            fresh1[shared_mask] = fresh0[shared_mask]
            theta[0, moved] = fresh0[moved]
            theta[1, moved] = fresh1[moved]
        for label in (0, 1):
            draws = rng.random((cfg.samples_per_month_per_class, d)) < theta[label]
            for row in draws.astype(np.uint8):
                dataset.records.append(
                    FeatureRecord(f"s{counter:07d}", month, label, row)
                )
                counter += 1
    return dataset
