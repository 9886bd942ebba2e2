"""Classifier-augmented autoencoder, anchor selection, and the latent
signal-integrity score.

The bundle maps a segment to an 11-dimensional latent; the score of a
segment is the negative Euclidean distance between its latent and an
anchor chosen as the medoid of the valid-segment latents. Scoring is two
small matrix products, which is what makes it cheap compared with eye
rasterization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .equalizer import ActionVector, ParamRanges, apply_chain, params_from_action
from .errors import ConfigError, DataError, ShapeError
from .nn import Adam, DenseNet, backward, forward, load_checkpoint, save_checkpoint
from .signal import DEFAULT_SWING_MV, label_validity

CLASSIFIER_CLIP = 1e-7
ANCHOR_EXACT_LIMIT = 2000


@dataclass
class AeConfig:
    """Training knobs for the autoencoder; defaults are the tuned set."""

    latent: int = 11
    hidden: tuple[int, ...] = (256, 64)
    lr: float = 1e-3
    weight_decay: float = 1e-5
    batch: int = 256
    epochs: int = 200
    seed: int = 0
    val_frac: float = 0.1
    # Input/output full-scale in mV; None derives 1.25 * swing from the data.
    scale: float | None = None
    # Equalized copies of each segment added to the training corpus, labeled
    # by the same mask rule. Raw channel output alone leaves the encoder
    # free to place equalized waveforms anywhere; showing it the equalizer's
    # output family makes the anchor distance rank those waveforms sensibly.
    # Together with the operating-range share of _sample_action this keeps
    # valid equalized waveforms the majority of the valid corpus, which
    # puts the anchor medoid in well-equalized territory.
    eq_augment: int = 3
    # Off by default: invalid samples contribute no classification term.
    penalize_invalid: bool = False
    # The pipeline relaxes this on degenerate channels whose segments are
    # all valid; the loss stays well defined because every row carries
    # the classification term.
    require_both_classes: bool = True


@dataclass
class LatentVector:
    z: np.ndarray

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=np.float64)
        if self.z.ndim != 1 or not np.all(np.isfinite(self.z)):
            raise ShapeError("latent must be a finite vector")

    @property
    def l(self) -> int:
        return self.z.size


@dataclass
class AnchorPoint:
    c: np.ndarray
    source_index: int


@dataclass
class AutoencoderBundle:
    encoder: DenseNet
    decoder: DenseNet
    classifier: DenseNet
    scale: float
    loss_trace: list = field(default_factory=list)
    val_loss_trace: list = field(default_factory=list)

    @property
    def n_x(self) -> int:
        return self.encoder.in_dim

    @property
    def latent_dim(self) -> int:
        return self.encoder.out_dim

    def parameters(self) -> list[np.ndarray]:
        return self.encoder.parameters() + self.decoder.parameters() + self.classifier.parameters()

    def save(self, path, extra: dict | None = None) -> None:
        payload = {
            "scale": self.scale,
            "loss_trace": list(self.loss_trace),
            "val_loss_trace": list(self.val_loss_trace),
        }
        payload.update(extra or {})
        save_checkpoint(
            path,
            {"encoder": self.encoder, "decoder": self.decoder, "classifier": self.classifier},
            extra=payload,
        )

    @classmethod
    def load(cls, path) -> "AutoencoderBundle":
        blob = load_checkpoint(path)
        extra = blob.get("extra", {})
        return cls(
            encoder=blob["nets"]["encoder"],
            decoder=blob["nets"]["decoder"],
            classifier=blob["nets"]["classifier"],
            scale=extra["scale"],
            loss_trace=extra.get("loss_trace", []),
            val_loss_trace=extra.get("val_loss_trace", []),
        )


def build_bundle(n_x: int, latent: int, hidden: tuple[int, ...], scale: float, seed: int) -> AutoencoderBundle:
    """Fresh bundle: relu trunk encoder with a linear latent layer, mirrored
    decoder ending in a scaled tanh, single sigmoid classifier head."""
    enc_dims = [n_x, *hidden, latent]
    dec_dims = [latent, *hidden[::-1], n_x]
    n_hidden = len(hidden)
    encoder = DenseNet.create(enc_dims, ["relu"] * n_hidden + ["linear"], seed=seed)
    decoder = DenseNet.create(
        dec_dims, ["relu"] * n_hidden + ["tanh_scaled"], seed=seed + 1, scales={n_hidden: scale}
    )
    classifier = DenseNet.create([latent, 1], ["sigmoid"], seed=seed + 2)
    return AutoencoderBundle(encoder=encoder, decoder=decoder, classifier=classifier, scale=scale)


def _as_xy(data) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(data, tuple):
        x, y = data
    else:
        x, y = data.matrix, data.labels
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    if x.ndim != 2 or y.shape != (x.shape[0],):
        raise ShapeError(f"expected (m, n_x) inputs with m labels, got {x.shape} and {y.shape}")
    return x, y


def _squash(x: np.ndarray, scale: float) -> np.ndarray:
    """Clip to the representable voltage window, then normalize to [-1, 1].

    The decoder's scaled tanh cannot produce values beyond +-scale, so the
    bundle treats that window as its domain; clipping keeps excursions from
    pushing the encoder outside the envelope it was trained on.
    """
    return np.clip(x, -scale, scale) / scale


def _bundle_pass(bundle: AutoencoderBundle, x: np.ndarray, y: np.ndarray, penalize_invalid: bool):
    """One forward pass plus the pieces backward needs."""
    u = _squash(x, bundle.scale)
    z, t_enc = forward(bundle.encoder, u)
    xhat, t_dec = forward(bundle.decoder, z)
    yraw, t_clf = forward(bundle.classifier, z)
    yhat = np.clip(yraw[:, 0], CLASSIFIER_CLIP, 1.0 - CLASSIFIER_CLIP)
    b = x.shape[0]
    rec = float(np.mean((u - xhat / bundle.scale) ** 2))
    cls = float(-np.sum(y * np.log(yhat)) / b)
    if penalize_invalid:
        cls += float(-np.sum((1 - y) * np.log(1.0 - yhat)) / b)
    return rec + cls, (u, z, xhat, yraw, yhat, t_enc, t_dec, t_clf)


def combined_loss(bundle: AutoencoderBundle, x, y, penalize_invalid: bool = False) -> float:
    """Mean squared reconstruction error in full-scale units plus the
    valid-only classification term, averaged over the batch."""
    x, y = _as_xy((np.atleast_2d(x), np.asarray(y)))
    loss, _ = _bundle_pass(bundle, x, y, penalize_invalid)
    return loss


def loss_and_grads(
    bundle: AutoencoderBundle, x, y, penalize_invalid: bool = False
) -> tuple[float, list[np.ndarray]]:
    """Combined loss and exact gradients aligned with bundle.parameters().

    The classification term only ever contributes gradient on y=1 rows
    (and on y=0 rows when penalize_invalid is set); where the classifier
    output sits in the clamp region its gradient is zero, matching the
    flat clamped loss.
    """
    x, y = _as_xy((np.atleast_2d(x), np.asarray(y)))
    loss, (u, z, xhat, yraw, yhat, t_enc, t_dec, t_clf) = _bundle_pass(
        bundle, x, y, penalize_invalid
    )
    b, n_x = x.shape
    d_xhat = 2.0 * (xhat - u * bundle.scale) / (b * n_x * bundle.scale**2)
    g_dec, dz_rec = backward(bundle.decoder, t_dec, d_xhat)
    live = (yraw[:, 0] > CLASSIFIER_CLIP) & (yraw[:, 0] < 1.0 - CLASSIFIER_CLIP)
    d_yraw = np.zeros_like(yraw)
    d_yraw[:, 0] = np.where((y == 1) & live, -1.0 / (b * yhat), 0.0)
    if penalize_invalid:
        d_yraw[:, 0] += np.where((y == 0) & live, 1.0 / (b * (1.0 - yhat)), 0.0)
    g_clf, dz_cls = backward(bundle.classifier, t_clf, d_yraw)
    g_enc, _ = backward(bundle.encoder, t_enc, dz_rec + dz_cls)
    return loss, g_enc + g_dec + g_clf


def equalized_variants(dataset, per_segment: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Equalizer outputs for random actions over the dataset's segments,
    labeled by the dataset's own mask.

    Both chain kinds are sampled so the corpus covers the full family of
    waveforms an optimizer can produce.
    """
    if per_segment < 1:
        raise ConfigError(f"per_segment must be >= 1, got {per_segment}")
    rng = np.random.default_rng([seed, 977])
    swing = getattr(getattr(dataset, "config", None), "swing", None) or DEFAULT_SWING_MV
    boxes = (ParamRanges.dfe_only(), ParamRanges.ctle_dfe())
    xs, ys = [], []
    for seg in dataset.segments:
        for _ in range(per_segment):
            box = boxes[int(rng.integers(len(boxes)))]
            a = ActionVector(_sample_action(rng, box.d))
            ctle, dfe = params_from_action(a, box)
            eq = apply_chain(seg, ctle, dfe)
            xs.append(eq.data)
            ys.append(label_validity(eq, dataset.mask, swing=swing))
    return np.vstack(xs), np.asarray(ys, dtype=np.int8)


# Per-tap caps for operating-range draws. Post-cursor ISI decays with lag,
# so productive DFE magnitudes decay with tap index; capping the draws the
# same way concentrates the corpus where real equalizer settings live.
DFE_DECAY_CAPS = (0.8, 0.45, 0.25, 0.15)


def _sample_action(rng: np.random.Generator, d: int) -> np.ndarray:
    """Half operating-range draws, a quarter uniform, a quarter on faces
    and corners.

    The anchor is the medoid of the valid corpus, so well-equalized
    waveforms must dominate that set; uniform draws over the box mostly
    over-equalize and raw segments would otherwise outnumber everything.
    Uniform draws stay in for coverage of the invalid families, and the
    face/corner share gives the classifier an opinion about the box
    boundaries that policy optimization gravitates to.
    """
    u = rng.random()
    if u < 0.5:
        caps = np.ones(d)
        caps[-4:] = DFE_DECAY_CAPS
        return rng.random(d) * caps
    if u < 0.75:
        return rng.random(d)
    pick = rng.integers(3, size=d)
    a = rng.random(d)
    a[pick == 0] = 0.0
    a[pick == 1] = 1.0
    return a


def train_autoencoder(data, cfg: AeConfig | None = None) -> AutoencoderBundle:
    """Train encoder, decoder, and classifier jointly.

    `data` is a labeled dataset (anything with .matrix and .labels) or a
    plain (x, y) tuple. Requires both classes to be present in the training
    corpus. When the data carries segments and a mask, cfg.eq_augment
    equalized variants per segment are appended to the corpus before the
    split.
    """
    cfg = cfg or AeConfig()
    x, y = _as_xy(data)
    if cfg.eq_augment > 0 and hasattr(data, "segments") and getattr(data, "mask", None) is not None:
        x_aug, y_aug = equalized_variants(data, cfg.eq_augment, cfg.seed)
        x = np.vstack([x, x_aug])
        y = np.concatenate([y, y_aug])
    classes = np.unique(y)
    if classes.size < 2 and (cfg.require_both_classes or not np.all(y == 1)):
        raise DataError(f"training needs both labels, got only {classes.tolist()}")
    scale = cfg.scale
    if scale is None:
        swing = getattr(getattr(data, "config", None), "swing", None)
        if swing is None:
            raise ConfigError("cfg.scale is required when the data carries no swing")
        scale = 1.25 * swing

    rng = np.random.default_rng(cfg.seed)
    m = x.shape[0]
    perm = rng.permutation(m)
    n_val = max(1, int(round(cfg.val_frac * m)))
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    if np.unique(y[train_idx]).size < classes.size:
        raise DataError("train split lost a class; need more data")

    bundle = build_bundle(x.shape[1], cfg.latent, cfg.hidden, scale, cfg.seed)
    opt = Adam(
        bundle.parameters(),
        lr=cfg.lr,
        weight_decay=cfg.weight_decay,
        nets=[bundle.encoder, bundle.decoder, bundle.classifier],
    )
    for _ in range(cfg.epochs):
        order = rng.permutation(train_idx.size)
        epoch_loss = 0.0
        n_batches = 0
        for lo in range(0, order.size, cfg.batch):
            rows = train_idx[order[lo : lo + cfg.batch]]
            loss, grads = loss_and_grads(bundle, x[rows], y[rows], cfg.penalize_invalid)
            opt.step(grads)
            epoch_loss += loss
            n_batches += 1
        bundle.loss_trace.append(epoch_loss / max(n_batches, 1))
        val_loss, _ = _bundle_pass(bundle, x[val_idx], y[val_idx], cfg.penalize_invalid)
        bundle.val_loss_trace.append(val_loss)
    return bundle


def encode(bundle: AutoencoderBundle, segment) -> LatentVector:
    """Deterministic encoder pass on one segment (or raw sample vector)."""
    values = np.asarray(getattr(segment, "data", segment), dtype=np.float64)
    if values.ndim != 1 or values.size != bundle.n_x:
        raise ShapeError(f"segment length {values.shape} does not match encoder input {bundle.n_x}")
    z, _ = forward(bundle.encoder, _squash(values, bundle.scale))
    return LatentVector(z)


def encode_matrix(bundle: AutoencoderBundle, x: np.ndarray) -> np.ndarray:
    """Batch encoder pass; rows of x are segments."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != bundle.n_x:
        raise ShapeError(f"expected (m, {bundle.n_x}) matrix, got {x.shape}")
    z, _ = forward(bundle.encoder, _squash(x, bundle.scale))
    return z


def classify(bundle: AutoencoderBundle, z: np.ndarray) -> np.ndarray:
    """Classifier probability for latents (vector or matrix)."""
    y, _ = forward(bundle.classifier, z)
    return y[..., 0]


def compute_anchor(valid_latents, seed: int = 0) -> AnchorPoint:
    """Medoid of the valid-latent set: the member minimizing the summed
    Euclidean distance to all members, ties broken by lowest index.

    Sets larger than ANCHOR_EXACT_LIMIT are reduced to a seeded subsample
    before the exact quadratic scan.
    """
    z = _latents_matrix(valid_latents)
    if z.shape[0] == 0:
        raise DataError("anchor needs at least one valid latent")
    index = np.arange(z.shape[0])
    if z.shape[0] > ANCHOR_EXACT_LIMIT:
        rng = np.random.default_rng(seed)
        index = np.sort(rng.choice(z.shape[0], size=ANCHOR_EXACT_LIMIT, replace=False))
        z = z[index]
    sums = cdist(z, z).sum(axis=1)
    best = int(np.argmin(sums))
    return AnchorPoint(c=z[best].copy(), source_index=int(index[best]))


def _latents_matrix(latents) -> np.ndarray:
    if isinstance(latents, np.ndarray):
        return np.atleast_2d(np.asarray(latents, dtype=np.float64))
    rows = [lv.z if isinstance(lv, LatentVector) else np.asarray(lv, dtype=np.float64) for lv in latents]
    if not rows:
        return np.empty((0, 0))
    return np.vstack(rows)


def latent_si(bundle: AutoencoderBundle, anchor: AnchorPoint, segment) -> float:
    """Negative distance to the anchor; zero is best, more negative is worse."""
    z = encode(bundle, segment).z
    return -float(np.linalg.norm(anchor.c - z))
