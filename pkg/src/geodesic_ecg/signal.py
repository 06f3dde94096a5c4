"""Signal-domain preprocessing and synthetic cohort generation.

Covers R-peak alignment of multichannel recordings, spatial filtering and
covariance estimation, vectorcardiogram (VCG) rotation augmentation via the
inverse Dower transform, the on-disk dataset layout, and a synthetic cohort
generator that stands in for clinical data.
"""

import json
import os
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import spd
from .errors import (
    AngleOutOfRange,
    DegenerateSignal,
    EmptyRecording,
    InvalidSpec,
    NotPositiveDefinite,
    SingularPooledCovariance,
    TooFewClasses,
    WindowTooLarge,
    WrongChannelCount,
)

STANDARD_LEADS = ("I", "II", "III", "aVR", "aVL", "aVF",
                  "V1", "V2", "V3", "V4", "V5", "V6")

# Independent leads used by the inverse Dower transform: I, II, V1..V6.
_INDEPENDENT_LEAD_IDX = (0, 1, 6, 7, 8, 9, 10, 11)

# Inverse Dower coefficients mapping the 8 independent leads
# (I, II, V1, V2, V3, V4, V5, V6) to the orthogonal X/Y/Z VCG axes.
# Constants from Edenbrandt & Pahlm, J Electrocardiol 21:361-367 (1988).
INVERSE_DOWER = np.array([
    [0.156, -0.010, -0.172, -0.074, 0.122, 0.231, 0.239, 0.194],
    [-0.227, 0.887, 0.057, -0.019, -0.106, -0.022, 0.041, 0.048],
    [0.022, 0.102, -0.229, -0.310, -0.246, -0.063, 0.055, 0.108],
])


@dataclass(frozen=True)
class MultiChannelRecording:
    """One patient-tagged c x T multichannel signal."""

    patient_id: str
    label: str
    samples: np.ndarray
    sample_rate_hz: float = 500.0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 2:
            raise ValueError(f"samples must be a (channels, time) matrix, got shape {samples.shape}")
        if samples.shape[1] < 2:
            raise EmptyRecording(f"recording needs at least 2 samples, got {samples.shape[1]}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("recording contains NaN or Inf samples")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample rate must be positive")
        object.__setattr__(self, "samples", samples)

    @property
    def channels(self):
        return self.samples.shape[0]

    @property
    def n_samples(self):
        return self.samples.shape[1]

    def with_samples(self, samples):
        return MultiChannelRecording(self.patient_id, self.label, samples, self.sample_rate_hz)


@dataclass(frozen=True)
class SpatialFilter:
    """m x c spatial filter with unit-norm rows."""

    weights: np.ndarray
    kind: str = "identity"

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float)
        if weights.ndim != 2:
            raise ValueError("filter weights must be a 2-d matrix")
        norms = np.linalg.norm(weights, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-8):
            raise ValueError("filter rows must be unit-norm to 1e-8")
        object.__setattr__(self, "weights", weights)

    @property
    def in_channels(self):
        return self.weights.shape[1]

    @property
    def out_channels(self):
        return self.weights.shape[0]

    @classmethod
    def identity(cls, channels):
        return cls(np.eye(channels), kind="identity")

    def apply(self, samples):
        return self.weights @ samples


def align_r_peaks(rec, reference_channel=1, window_samples=500):
    """Center a recording window on its R peak.

    The peak is the sample of maximum absolute amplitude on the reference
    channel (default channel index 1, lead II). A window of
    ``window_samples`` centered on the peak is extracted, zero-padded at the
    boundaries, so the output has exactly ``window_samples`` columns with
    the peak at index ``window_samples // 2``.

    Parameters
    ----------
    rec : MultiChannelRecording
    reference_channel : int
        Channel used for peak detection.
    window_samples : int
        Output window length; must not exceed the recording length.

    Returns
    -------
    MultiChannelRecording
        Aligned recording of length ``window_samples``.
    """
    samples = rec.samples
    if samples.shape[1] == 0:
        raise EmptyRecording("cannot align an empty recording")
    if window_samples > samples.shape[1]:
        raise WindowTooLarge(
            f"window of {window_samples} exceeds recording length {samples.shape[1]}"
        )
    if not 0 <= reference_channel < samples.shape[0]:
        raise WrongChannelCount(
            f"reference channel {reference_channel} out of range for {samples.shape[0]} channels"
        )
    peak = int(np.argmax(np.abs(samples[reference_channel])))
    half = window_samples // 2
    start = peak - half
    out = np.zeros((samples.shape[0], window_samples))
    src_lo = max(start, 0)
    src_hi = min(start + window_samples, samples.shape[1])
    out[:, src_lo - start:src_hi - start] = samples[:, src_lo:src_hi]
    return rec.with_samples(out)


def estimate_covariance(samples, spatial_filter=None, shrinkage=0.01):
    """Shrinkage-regularized spatial covariance of a recording.

    ``C = (1 - s) * Z Z^T / (T - 1) + s * (trace / m) * I`` where ``Z`` is
    the spatially filtered signal. The default shrinkage 0.01 keeps the
    output positive definite for rank-deficient signals.

    Parameters
    ----------
    samples : ndarray, shape (c, T) or MultiChannelRecording
    spatial_filter : SpatialFilter, optional
        Identity when omitted.
    shrinkage : float in [0, 1]

    Returns
    -------
    ndarray, shape (m, m)
        SPD covariance matrix.
    """
    if isinstance(samples, MultiChannelRecording):
        samples = samples.samples
    return estimate_covariances(np.asarray(samples, dtype=float)[np.newaxis],
                                spatial_filter, shrinkage)[0]


def estimate_covariances(stack, spatial_filter=None, shrinkage=0.01):
    """Batched covariance estimation over a (N, c, T) stack of signals."""
    stack = np.asarray(stack, dtype=float)
    if stack.ndim != 3:
        raise ValueError(f"expected a (N, c, T) stack, got shape {stack.shape}")
    if not 0.0 <= shrinkage <= 1.0:
        raise ValueError("shrinkage must lie in [0, 1]")
    n_t = stack.shape[2]
    if n_t < 2:
        raise EmptyRecording("covariance needs at least 2 time samples")
    if spatial_filter is not None:
        if spatial_filter.in_channels != stack.shape[1]:
            raise WrongChannelCount(
                f"filter expects {spatial_filter.in_channels} channels, "
                f"recording has {stack.shape[1]}"
            )
        stack = spatial_filter.weights @ stack
    m = stack.shape[1]
    raw = stack @ np.swapaxes(stack, -1, -2) / (n_t - 1)
    raw = 0.5 * (raw + np.swapaxes(raw, -1, -2))
    traces = np.trace(raw, axis1=-2, axis2=-1)
    covs = (1.0 - shrinkage) * raw + shrinkage * (traces / m)[:, None, None] * np.eye(m)
    try:
        spd.check_spd(covs, name="covariance")
    except NotPositiveDefinite as exc:
        raise DegenerateSignal(f"covariance not positive definite: {exc}") from exc
    return covs


def fit_xdawn(recordings, labels, n_filters_per_class=3):
    """Fit xDAWN-style spatial filters from aligned recordings.

    For each class the evoked response (class-average signal) covariance is
    contrasted against the pooled signal covariance through the generalized
    symmetric eigenproblem ``Sigma_k w = lambda Sigma_x w``; the top
    eigenvectors per class are stacked, rows unit-normalized.

    Parameters
    ----------
    recordings : sequence of ndarray or MultiChannelRecording
        Aligned signals, all of equal shape.
    labels : sequence
        Class label per recording; at least two distinct classes.
    n_filters_per_class : int

    Returns
    -------
    SpatialFilter
        Filter with ``K * n_filters_per_class`` rows in canonical class order.
    """
    mats = [r.samples if isinstance(r, MultiChannelRecording) else np.asarray(r, dtype=float)
            for r in recordings]
    if not mats:
        raise EmptyRecording("no recordings to fit on")
    shapes = {m.shape for m in mats}
    if len(shapes) != 1:
        raise ValueError(f"recordings must share one shape, got {sorted(shapes)}")
    labels = np.asarray(labels)
    classes = sorted(set(labels.tolist()))
    if len(classes) < 2:
        raise TooFewClasses("xDAWN needs at least two classes")
    stack = np.stack(mats)
    n_t = stack.shape[2]
    sigma_x = np.einsum("nct,ndt->cd", stack, stack) / (len(mats) * (n_t - 1))
    sigma_x = 0.5 * (sigma_x + sigma_x.T)
    sigma_x = sigma_x + 1e-8 * np.trace(sigma_x) * np.eye(sigma_x.shape[0])
    if np.linalg.eigvalsh(sigma_x)[0] <= 0:
        raise SingularPooledCovariance("pooled covariance singular after regularization")
    rows = []
    for cls in classes:
        evoked = stack[labels == cls].mean(axis=0)
        sigma_k = evoked @ evoked.T / (n_t - 1)
        sigma_k = 0.5 * (sigma_k + sigma_k.T)
        eigvals, eigvecs = scipy.linalg.eigh(sigma_k, sigma_x)
        top = eigvecs[:, np.argsort(eigvals)[::-1][:n_filters_per_class]]
        rows.append(top.T)
    weights = np.concatenate(rows, axis=0)
    weights = weights / np.linalg.norm(weights, axis=1, keepdims=True)
    return SpatialFilter(weights, kind="xdawn")


def dower_to_vcg(rec):
    """Project a standard 12-lead recording to 3-d VCG space.

    Selects the 8 independent leads (I, II, V1..V6) and applies the fixed
    3x8 inverse Dower coefficient matrix.
    """
    samples = rec.samples if isinstance(rec, MultiChannelRecording) else np.asarray(rec, dtype=float)
    if samples.shape[0] != 12:
        raise WrongChannelCount(f"Dower transform needs 12 leads, got {samples.shape[0]}")
    return INVERSE_DOWER @ samples[list(_INDEPENDENT_LEAD_IDX)]


def vcg_to_12lead(vcg):
    """Map a 3 x T VCG signal back to the 12 standard leads.

    The 8 independent leads are recovered with the pseudo-inverse of the
    inverse Dower matrix; the four dependent limb leads follow from the
    standard linear relations (III = II - I, aVR = -(I + II)/2,
    aVL = I - II/2, aVF = II - I/2).
    """
    vcg = np.asarray(vcg, dtype=float)
    if vcg.shape[0] != 3:
        raise WrongChannelCount(f"VCG signal needs 3 axes, got {vcg.shape[0]}")
    y8 = np.linalg.pinv(INVERSE_DOWER) @ vcg
    lead_i, lead_ii = y8[0], y8[1]
    out = np.empty((12, vcg.shape[1]))
    out[0] = lead_i
    out[1] = lead_ii
    out[2] = lead_ii - lead_i
    out[3] = -(lead_i + lead_ii) / 2.0
    out[4] = lead_i - lead_ii / 2.0
    out[5] = lead_ii - lead_i / 2.0
    out[6:] = y8[2:]
    return out


def _rotation_matrix(ax_deg, ay_deg, az_deg):
    ax, ay, az = np.deg2rad([ax_deg, ay_deg, az_deg])
    rx = np.array([[1, 0, 0],
                   [0, np.cos(ax), -np.sin(ax)],
                   [0, np.sin(ax), np.cos(ax)]])
    ry = np.array([[np.cos(ay), 0, np.sin(ay)],
                   [0, 1, 0],
                   [-np.sin(ay), 0, np.cos(ay)]])
    rz = np.array([[np.cos(az), -np.sin(az), 0],
                   [np.sin(az), np.cos(az), 0],
                   [0, 0, 1]])
    return rz @ ry @ rx


def vcg_augment(rec, angles_deg):
    """Rotate a recording in VCG space and project back to 12 leads.

    Parameters
    ----------
    rec : MultiChannelRecording
        12-lead recording in standard lead order.
    angles_deg : tuple of 3 floats
        Rotation angles about the X, Y and Z axes, each in [-45, 45]
        degrees. ``(0, 0, 0)`` returns the Dower-subspace projection of the
        input.

    Returns
    -------
    MultiChannelRecording
        Rotated recording with the original length and sample rate.
    """
    angles = np.asarray(angles_deg, dtype=float)
    if angles.shape != (3,):
        raise ValueError("angles_deg must contain exactly three angles")
    if np.any(np.abs(angles) > 45.0):
        raise AngleOutOfRange(f"rotation angles limited to 45 degrees, got {angles}")
    vcg = dower_to_vcg(rec)
    rotated = _rotation_matrix(*angles) @ vcg
    return rec.with_samples(vcg_to_12lead(rotated))


# ---------------------------------------------------------------------------
# Synthetic cohort generation
# ---------------------------------------------------------------------------

# Patient counts of the five anatomical diagnosis classes in the cohort the
# generator mimics (ToF, ASD, PA, Fontan, Mustard).
DEFAULT_CLASSES = (("ToF", 173), ("ASD", 77), ("PA", 73), ("Fontan", 66), ("Mustard", 47))

_TEMPLATE_STREAM = 2**62 + 11


@dataclass(frozen=True)
class CohortSpec:
    """Parameters of a synthetic multichannel cohort.

    Each patient gets an SPD covariance drawn by perturbing that class's
    ground-truth template along a random tangent direction of length
    ``within_class_dispersion``; recordings are zero-mean Gaussian series
    with that covariance plus isotropic noise and one planted R peak.

    The default sample rate is deliberately low (128 Hz) so the full
    ablation grid stays desk-scale; clinical 12-lead data would typically
    use 500 Hz.
    """

    classes: tuple = DEFAULT_CLASSES
    recordings_per_patient: tuple = (10, 2, 40)  # (mean, min, max)
    class_covariances: np.ndarray | None = None
    class_separation: float = 1.0
    within_class_dispersion: float = 0.5
    noise_scale: float = 0.1
    channels: int = 12
    sample_rate_hz: float = 128.0
    duration_s: float = 1.5
    peak_amplitude: float = 6.0
    seed: int = 0

    def __post_init__(self):
        if not self.classes:
            raise InvalidSpec("cohort needs at least one class")
        classes = tuple((str(name), int(count)) for name, count in self.classes)
        object.__setattr__(self, "classes", classes)
        names = [name for name, _ in classes]
        if len(set(names)) != len(names):
            raise InvalidSpec("class names must be unique")
        for name, count in classes:
            if count < 2:
                raise InvalidSpec(
                    f"class {name!r} has {count} patient(s); patient leave-out "
                    f"needs at least 2 per class"
                )
        mean, lo, hi = self.recordings_per_patient
        if not 1 <= lo <= mean <= hi:
            raise InvalidSpec("recordings_per_patient must satisfy 1 <= min <= mean <= max")
        if self.noise_scale < 0 or self.within_class_dispersion < 0:
            raise InvalidSpec("noise and dispersion must be nonnegative")
        if self.channels < 1 or self.sample_rate_hz <= 0 or self.duration_s <= 0:
            raise InvalidSpec("channels, sample rate and duration must be positive")
        if self.class_covariances is not None:
            covs = np.asarray(self.class_covariances, dtype=float)
            if covs.shape != (len(classes), self.channels, self.channels):
                raise InvalidSpec(
                    f"class_covariances must have shape "
                    f"({len(classes)}, {self.channels}, {self.channels})"
                )
            spd.check_spd(covs, name="class covariance template")
            object.__setattr__(self, "class_covariances", covs)

    @property
    def n_samples(self):
        return int(round(self.sample_rate_hz * self.duration_s))


def _random_symmetric_direction(rng, n):
    """Unit-Frobenius-norm random symmetric matrix."""
    g = rng.standard_normal((n, n))
    s = 0.5 * (g + g.T)
    return s / np.linalg.norm(s)


def class_templates(spec):
    """Ground-truth class covariance templates for a cohort spec.

    Defaults to well-conditioned SPD matrices ``exp(separation * D_k)`` with
    mutually Frobenius-orthogonal symmetric directions ``D_k``, so every
    template sits at AIRM distance ``class_separation`` from the identity
    and pairwise template distances scale with the same knob.
    """
    if spec.class_covariances is not None:
        return np.asarray(spec.class_covariances, dtype=float)
    rng = np.random.default_rng((spec.seed, _TEMPLATE_STREAM))
    n = spec.channels
    directions = []
    for _ in spec.classes:
        d = _random_symmetric_direction(rng, n)
        for prev in directions:  # Gram-Schmidt in the space of symmetric matrices
            d = d - np.sum(d * prev) * prev
        d = d / np.linalg.norm(d)
        directions.append(d)
    return np.stack([spd.expm(spec.class_separation * d) for d in directions])


def _peak_profile(channels, reference_channel=1):
    prof = np.exp(-np.abs(np.arange(channels) - reference_channel) / 3.0)
    return prof / prof.max()


def generate_cohort(spec):
    """Generate a deterministic synthetic cohort.

    Every patient derives its own random stream from ``(seed,
    patient_index)``, so output is bytewise reproducible and patients could
    be generated independently.

    Returns
    -------
    list of MultiChannelRecording
    """
    templates = class_templates(spec)
    n_t = spec.n_samples
    if n_t < 4:
        raise InvalidSpec("recording duration too short for the sample rate")
    mean_recs, lo_recs, hi_recs = spec.recordings_per_patient
    profile = _peak_profile(spec.channels)
    recordings = []
    patient_index = 0
    for class_idx, (class_name, n_patients) in enumerate(spec.classes):
        template = templates[class_idx]
        for local_idx in range(n_patients):
            rng = np.random.default_rng((spec.seed, patient_index))
            direction = _random_symmetric_direction(rng, spec.channels)
            if spec.within_class_dispersion > 0:
                patient_cov = spd.exp_map(template, spec.within_class_dispersion * direction)
            else:
                patient_cov = template
            chol = np.linalg.cholesky(patient_cov)
            amp = spec.peak_amplitude * np.sqrt(np.max(np.diag(patient_cov)) + spec.noise_scale**2)
            n_recs = int(np.clip(rng.poisson(mean_recs), lo_recs, hi_recs))
            for _ in range(n_recs):
                series = chol @ rng.standard_normal((spec.channels, n_t))
                if spec.noise_scale > 0:
                    series = series + spec.noise_scale * rng.standard_normal((spec.channels, n_t))
                peak_at = int(rng.integers(n_t // 3, 2 * n_t // 3))
                width = max(2.0, 0.02 * spec.sample_rate_hz)
                pulse = np.exp(-0.5 * ((np.arange(n_t) - peak_at) / width) ** 2)
                series = series + amp * np.outer(profile, pulse)
                recordings.append(MultiChannelRecording(
                    patient_id=f"{class_name}-{local_idx:03d}",
                    label=class_name,
                    samples=series,
                    sample_rate_hz=spec.sample_rate_hz,
                ))
            patient_index += 1
    return recordings


# ---------------------------------------------------------------------------
# Dataset on disk: manifest.json + one CSV per recording
# ---------------------------------------------------------------------------

MANIFEST_NAME = "manifest.json"


def save_dataset(recordings, out_dir):
    """Write recordings as ``manifest.json`` plus one c x T CSV each."""
    if not recordings:
        raise InvalidSpec("refusing to write an empty dataset")
    rates = {rec.sample_rate_hz for rec in recordings}
    if len(rates) != 1:
        raise InvalidSpec("all recordings must share one sample rate")
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for i, rec in enumerate(recordings):
        fname = f"rec_{i:05d}.csv"
        np.savetxt(os.path.join(out_dir, fname), rec.samples, delimiter=",", fmt="%.10g")
        entries.append({"patient_id": rec.patient_id, "label": rec.label, "file": fname})
    manifest = {
        "schema_version": 1,
        "sample_rate_hz": rates.pop(),
        "recordings": entries,
    }
    _atomic_write_json(os.path.join(out_dir, MANIFEST_NAME), manifest)


def load_dataset(in_dir):
    """Read a dataset written by :func:`save_dataset`."""
    manifest_path = os.path.join(in_dir, MANIFEST_NAME)
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("schema_version") != 1:
        raise InvalidSpec(f"unsupported manifest schema: {manifest.get('schema_version')!r}")
    rate = float(manifest["sample_rate_hz"])
    recordings = []
    for entry in manifest["recordings"]:
        samples = np.loadtxt(os.path.join(in_dir, entry["file"]), delimiter=",", ndmin=2)
        recordings.append(MultiChannelRecording(
            patient_id=entry["patient_id"],
            label=entry["label"],
            samples=samples,
            sample_rate_hz=rate,
        ))
    return recordings


def _atomic_write_json(path, payload):
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def patients_per_class(recordings):
    """Map class label -> number of distinct patients, in sorted label order."""
    seen = {}
    for rec in recordings:
        seen.setdefault(rec.label, set()).add(rec.patient_id)
    return {label: len(ids) for label, ids in sorted(seen.items())}
