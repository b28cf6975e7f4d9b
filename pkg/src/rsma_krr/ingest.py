"""Measured impulse responses: CSV loading and conversion to pressure snapshots.

File layout::

    # sample_rate_hz=48000
    # channel,<id>,<x>,<y>,<z>
    # channel,<id>,<x>,<y>,<z>
    <id>,<id>            <- column header naming the channels
    h_0(t0),h_1(t0)
    ...

Positions are in metres. Channels listed in the column header must each have
a ``# channel`` line; extra geometry lines are an error too.
"""
import csv
import math
from dataclasses import dataclass, field

import numpy as np

from rsma_krr.estimators import PressureSnapshot
from rsma_krr.geometry import MicArray


class IngestError(ValueError):
    """Base class for malformed impulse-response files."""

    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class HeaderError(IngestError):
    pass


class RaggedRowError(IngestError):
    pass


class GeometryError(IngestError):
    pass


@dataclass(frozen=True)
class ImpulseResponseSet:
    sample_rate: float
    channel_ids: tuple
    positions: np.ndarray = field(repr=False)  # (C, 3)
    data: np.ndarray = field(repr=False)  # (C, T)

    def __post_init__(self):
        if not self.sample_rate > 0 or not math.isfinite(self.sample_rate):
            raise ValueError("sample rate must be positive and finite")
        c = len(self.channel_ids)
        if self.data.ndim != 2 or self.data.shape[0] != c:
            raise ValueError("need one time series per channel")
        if self.positions.shape != (c, 3):
            raise ValueError("need one position per channel")
        if len(set(self.channel_ids)) != c:
            raise ValueError("duplicate channel ids")

    @property
    def num_samples(self):
        return self.data.shape[1]

    @property
    def nyquist(self):
        return self.sample_rate / 2

    def select(self, ids):
        idx = [self.channel_ids.index(i) for i in ids]
        return ImpulseResponseSet(self.sample_rate, tuple(ids), self.positions[idx], self.data[idx])


@dataclass(frozen=True)
class BinChoice:
    index: int
    frequency: float
    requested: float

    @property
    def deviation(self):
        return self.frequency - self.requested


def _parse_float(text, line, what, exc=HeaderError):
    try:
        return float(text)
    except ValueError:
        raise exc(f"cannot parse {what} {text.strip()!r}", line) from None


def load_ir_csv(path):
    sample_rate = None
    geometry = {}
    header = None
    rows = []
    with open(path, newline="") as f:
        for lineno, raw in enumerate(f, start=1):
            text = raw.strip()
            if not text:
                continue
            if text.startswith("#"):
                body = text[1:].strip()
                if body.startswith("sample_rate_hz"):
                    key, sep, value = body.partition("=")
                    if not sep or key.strip() != "sample_rate_hz":
                        raise HeaderError("expected 'sample_rate_hz=<value>'", lineno)
                    sample_rate = _parse_float(value, lineno, "sample rate")
                    if not sample_rate > 0 or not math.isfinite(sample_rate):
                        raise HeaderError(f"sample rate must be positive, got {sample_rate}", lineno)
                elif body.startswith("channel"):
                    parts = next(csv.reader([body]))
                    if len(parts) != 5 or parts[0].strip() != "channel":
                        raise HeaderError("expected '# channel,<id>,x,y,z'", lineno)
                    cid = parts[1].strip()
                    if cid in geometry:
                        raise GeometryError(f"channel {cid!r} positioned twice", lineno)
                    geometry[cid] = [_parse_float(p, lineno, "coordinate", GeometryError)
                                     for p in parts[2:]]
                continue  # other comments are ignored
            cells = [c.strip() for c in next(csv.reader([text]))]
            if header is None:
                header = (tuple(cells), lineno)
                continue
            if len(cells) != len(header[0]):
                raise RaggedRowError(f"expected {len(header[0])} columns, got {len(cells)}", lineno)
            rows.append([_parse_float(c, lineno, "sample", RaggedRowError) for c in cells])

    if sample_rate is None:
        raise HeaderError("missing '# sample_rate_hz=' header")
    if header is None:
        raise HeaderError("missing channel column header")
    ids, hline = header
    if len(set(ids)) != len(ids):
        raise HeaderError("duplicate channel ids in column header", hline)
    for cid in ids:
        if cid not in geometry:
            raise GeometryError(f"no position given for channel {cid!r}", hline)
    extra = sorted(set(geometry) - set(ids))
    if extra:
        raise GeometryError(f"positions given for unknown channels {extra}", hline)
    if not rows:
        raise RaggedRowError("no samples", hline)
    data = np.array(rows, dtype=float).T
    positions = np.array([geometry[c] for c in ids], dtype=float)
    return ImpulseResponseSet(sample_rate, ids, positions, data)


def write_ir_csv(path, irs):
    with open(path, "w", newline="") as f:
        f.write(f"# sample_rate_hz={float(irs.sample_rate)!r}\n")
        for cid, p in zip(irs.channel_ids, irs.positions):
            x, y, z = (repr(float(v)) for v in p)
            f.write(f"# channel,{cid},{x},{y},{z}\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(irs.channel_ids)
        for row in irs.data.T:
            w.writerow([repr(float(v)) for v in row])


def fade_window(n, fade_len):
    """Ones followed by a half-cosine fade-out over the last ``fade_len`` samples."""
    if not 0 <= fade_len <= n:
        raise ValueError("fade length must lie in [0, n]")
    w = np.ones(n)
    if fade_len:
        t = np.arange(1, fade_len + 1) / fade_len
        w[n - fade_len:] = 0.5 * (1 + np.cos(np.pi * t))
    return w


def nearest_bin(irs, frequency):
    if frequency < 0:
        raise ValueError("frequency must be non-negative")
    if frequency > irs.nyquist:
        raise ValueError(f"{frequency} Hz exceeds the Nyquist frequency {irs.nyquist} Hz")
    n = irs.num_samples
    freqs = np.fft.rfftfreq(n, 1 / irs.sample_rate)
    idx = int(np.argmin(np.abs(freqs - frequency)))
    return BinChoice(idx, float(freqs[idx]), float(frequency))


def ir_spectra(irs, fade_len=0):
    """One-sided spectra ``sum_n h[n] exp(+i 2 pi f n / fs)`` per channel.

    The positive exponent matches the ``exp(-i w t)`` time convention of the
    field model (a delay ``tau`` maps to ``exp(+i w tau)``); it is the complex
    conjugate of numpy's forward FFT.
    """
    data = irs.data * fade_window(irs.num_samples, fade_len) if fade_len else irs.data
    return np.fft.rfft(data, axis=1).conj()


def ir_to_snapshot(irs, frequency, ctx, radius=None, fade_len=0):
    """DFT of every channel at the bin nearest ``frequency``.

    ``ctx`` supplies the sound speed; the returned snapshot's context carries
    the bin frequency, not the requested one. ``radius`` defaults to the mean
    channel distance from the origin; channel positions are projected radially
    onto that sphere, since surveyed positions never sit on it exactly.

    Returns ``(snapshot, bin_choice)``.
    """
    choice = nearest_bin(irs, frequency)
    if choice.frequency <= 0:
        raise ValueError("the nearest bin is DC; use a longer response or higher frequency")
    values = ir_spectra(irs, fade_len)[:, choice.index]
    if radius is None:
        radius = float(np.mean(np.linalg.norm(irs.positions, axis=1)))
    array = MicArray.from_unit_vectors(irs.positions, radius)
    wave = type(ctx)(choice.frequency, ctx.sound_speed)
    return PressureSnapshot(wave, array, values), choice


def ir_to_values(irs, frequency, fade_len=0):
    """Spectral values at the nearest bin, for evaluation points (no array geometry)."""
    choice = nearest_bin(irs, frequency)
    return ir_spectra(irs, fade_len)[:, choice.index], choice
