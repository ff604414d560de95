"""Timestamp persistence (PTS1 binary format), curve CSV export and the JSON
experiment-config schema.

PTS1 layout (little-endian):
    magic    4 bytes  b"PTS1"
    version  u32      1 = photon stream, 2 = click stream
    tick_fs  u32      tick size in femtoseconds, always 1000 (1 ps)
    count    u64      number of events
    duration u64      stream duration in ticks
    [v2] detector_id  u8
    events   count * u64, strictly increasing
    [v2] provenance   count * u8 (0 photon, 1 dark, 2 afterpulse)
    [v1] label        u16 length + utf-8 bytes
The header is seekable and the event block is mmap-friendly.
"""
from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from photonlab.core import (
    ClickStream,
    PhotonStream,
    ns_to_ticks,
    seconds_to_ticks,
)
from photonlab.correlation import (
    MODE_ALL_PAIRS,
    MODE_CROSS,
    MODE_START_STOP,
    G2Curve,
)
from photonlab.detectors import DetectorParams, get_preset
from photonlab.emitters import (
    THREE_LEVEL_PRESETS,
    FockModeSpec,
    ThreeLevelParams,
)

MAGIC = b"PTS1"
TICK_FS = 1000
_HEADER = struct.Struct("<4sIIQ")


class CorruptFileError(ValueError):
    """Stream file is truncated or structurally invalid."""


class ConfigError(ValueError):
    """Experiment config is missing or malformed; message carries the JSON
    path of the offending field."""


def write_stream(path, stream) -> None:
    """Serialize a PhotonStream or ClickStream; round trips are bit-exact."""
    is_click = isinstance(stream, ClickStream)
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, 2 if is_click else 1, TICK_FS, len(stream)))
        f.write(struct.pack("<Q", stream.duration))
        if is_click:
            f.write(struct.pack("<B", stream.detector_id))
        f.write(stream.events.astype("<u8").tobytes())
        if is_click:
            f.write(stream.provenance.astype("u1").tobytes())
        else:
            label = stream.label.encode("utf-8")
            f.write(struct.pack("<H", len(label)))
            f.write(label)


def _read_exact(f, n, what):
    data = f.read(n)
    if len(data) != n:
        raise CorruptFileError(f"truncated file: {what} incomplete")
    return data


def read_stream(path):
    """Read a PTS1 file back; rejects corrupt or non-monotonic payloads."""
    with open(path, "rb") as f:
        magic, version, tick_fs, count = _HEADER.unpack(
            _read_exact(f, _HEADER.size, "header"))
        if magic != MAGIC:
            raise CorruptFileError(f"bad magic {magic!r}")
        if version not in (1, 2):
            raise CorruptFileError(f"unsupported version {version}")
        if tick_fs != TICK_FS:
            raise CorruptFileError(f"unsupported tick size {tick_fs} fs")
        (duration,) = struct.unpack("<Q", _read_exact(f, 8, "duration"))
        detector_id = 0
        if version == 2:
            (detector_id,) = struct.unpack("<B", _read_exact(f, 1, "detector id"))
        raw = _read_exact(f, 8 * count, "events")
        events = np.frombuffer(raw, dtype="<u8").astype(np.int64)
        if version == 2:
            prov = np.frombuffer(_read_exact(f, count, "provenance"), dtype="u1")
            stream = ClickStream(events, int(duration), detector_id=detector_id,
                                 provenance=prov.copy())
        else:
            (label_len,) = struct.unpack("<H", _read_exact(f, 2, "label length"))
            label = _read_exact(f, label_len, "label").decode("utf-8")
            stream = PhotonStream(events, int(duration), label=label)
        if f.read(1):
            raise CorruptFileError("trailing bytes after payload")
    return stream


def write_curve(path, curve: G2Curve) -> None:
    """CSV export: tau_ns, counts, g2, g2_err -- directly plottable."""
    with open(path, "w", newline="") as f:
        f.write("tau_ns,counts,g2,g2_err\n")
        for t, c, g, e in zip(curve.tau_ns, curve.counts, curve.g2, curve.g2_err):
            f.write(f"{t:.6f},{int(c)},{g:.9g},{e:.9g}\n")


def read_curve(path) -> G2Curve:
    data = np.genfromtxt(path, delimiter=",", names=True)
    if data.size == 0 or data.dtype.names != ("tau_ns", "counts", "g2", "g2_err"):
        raise CorruptFileError("curve CSV must have tau_ns,counts,g2,g2_err columns")
    data = np.atleast_1d(data)
    return G2Curve(tau_centers=data["tau_ns"] * 1000.0, g2=data["g2"],
                   g2_err=data["g2_err"], counts=data["counts"].astype(np.int64),
                   mode="imported")


# --------------------------------------------------------------------------
# experiment configuration

_MODES = (MODE_ALL_PAIRS, MODE_START_STOP, MODE_CROSS)
_FITS = ("three_level", "linear", "none")


@dataclass(frozen=True)
class CorrelationSpec:
    mode: str
    tau_min: int
    tau_max: int
    bin_width: int
    exp_correction: bool = False


@dataclass(frozen=True)
class HbtSpec:
    transmittance: float
    detectors: tuple[DetectorParams, DetectorParams]


@dataclass(frozen=True)
class SourceSpec:
    kind: str  # poisson | fock | three_level
    rate: float = 0.0
    fock: FockModeSpec | None = None
    three_level: ThreeLevelParams | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    source: SourceSpec
    configuration: str  # single_detector | hbt
    duration: int
    seed: int
    correlation: CorrelationSpec
    detector: DetectorParams | None = None
    hbt: HbtSpec | None = None
    fit: str = "none"
    save_streams: bool = False
    name: str = "experiment"


def _need(obj: dict, key: str, where: str):
    if key not in obj:
        raise ConfigError(f"{where}: missing required field '{key}'")
    return obj[key]


def _parse_detector(node, where: str) -> DetectorParams:
    if isinstance(node, str):
        try:
            return get_preset(node)
        except KeyError as e:
            raise ConfigError(f"{where}: {e.args[0]}") from None
    if not isinstance(node, dict):
        raise ConfigError(f"{where}: expected a preset name or an object")
    try:
        delay = node.get("afterpulse_delay_ns", (0, 0))
        return DetectorParams(
            efficiency=float(_need(node, "efficiency", where)),
            dead_time=ns_to_ticks(float(node.get("dead_time_ns", 0))),
            dark_rate=float(node.get("dark_rate", 0.0)),
            jitter_fwhm=ns_to_ticks(float(node.get("jitter_fwhm_ns", 0))),
            afterpulse_prob=float(node.get("afterpulse_prob", 0.0)),
            afterpulse_delay=(ns_to_ticks(float(delay[0])),
                              ns_to_ticks(float(delay[1]))),
        )
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}: {e}") from None


def _parse_source(node, where: str) -> SourceSpec:
    kind = _need(node, "kind", where)
    if kind == "poisson":
        rate = float(_need(node, "rate", where))
        if rate <= 0:
            raise ConfigError(f"{where}.rate: must be > 0")
        return SourceSpec(kind="poisson", rate=rate)
    if kind == "fock":
        try:
            spec = FockModeSpec(
                n=int(_need(node, "n", where)),
                mode_duration=ns_to_ticks(float(_need(node, "mode_duration_ns", where))),
                n_modes=int(_need(node, "n_modes", where)))
        except ValueError as e:
            raise ConfigError(f"{where}: {e}") from None
        return SourceSpec(kind="fock", fock=spec)
    if kind == "three_level":
        if "preset" in node:
            name = node["preset"]
            if name not in THREE_LEVEL_PRESETS:
                raise ConfigError(f"{where}.preset: unknown preset {name!r}")
            params = THREE_LEVEL_PRESETS[name]
        else:
            try:
                params = ThreeLevelParams(
                    k12=float(_need(node, "k12", where)),
                    k21=float(_need(node, "k21", where)),
                    k23=float(_need(node, "k23", where)),
                    k31=float(_need(node, "k31", where)))
            except ValueError as e:
                raise ConfigError(f"{where}: {e}") from None
        return SourceSpec(kind="three_level", three_level=params)
    raise ConfigError(f"{where}.kind: unknown source kind {kind!r}")


def parse_config(doc: dict, name: str = "experiment") -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("top level: expected a JSON object")
    source = _parse_source(_need(doc, "source", "source"), "source")
    configuration = _need(doc, "configuration", "configuration")
    if configuration not in ("single_detector", "hbt"):
        raise ConfigError("configuration: must be 'single_detector' or 'hbt'")
    duration_s = float(_need(doc, "duration_s", "duration_s"))
    if duration_s <= 0:
        raise ConfigError("duration_s: must be > 0")
    corr = _need(doc, "correlation", "correlation")
    mode = corr.get("mode", MODE_ALL_PAIRS)
    if mode not in _MODES:
        raise ConfigError(f"correlation.mode: unknown mode {mode!r}")
    try:
        cspec = CorrelationSpec(
            mode=mode,
            tau_min=ns_to_ticks(float(corr.get("tau_min_ns", 0))),
            tau_max=ns_to_ticks(float(_need(corr, "tau_max_ns", "correlation"))),
            bin_width=ns_to_ticks(float(corr.get("bin_width_ns", 1))),
            exp_correction=bool(corr.get("exp_correction", False)))
    except ValueError as e:
        raise ConfigError(f"correlation: {e}") from None
    detector = None
    if "detector" in doc:
        detector = _parse_detector(doc["detector"], "detector")
    hbt = None
    if "hbt" in doc:
        h = doc["hbt"]
        dets = _need(h, "detectors", "hbt")
        if not isinstance(dets, list) or len(dets) != 2:
            raise ConfigError("hbt.detectors: expected a list of two detectors")
        t = float(h.get("transmittance", 0.5))
        if not 0.0 <= t <= 1.0:
            raise ConfigError("hbt.transmittance: must be in [0, 1]")
        hbt = HbtSpec(transmittance=t,
                      detectors=(_parse_detector(dets[0], "hbt.detectors[0]"),
                                 _parse_detector(dets[1], "hbt.detectors[1]")))
    if configuration == "single_detector" and detector is None:
        raise ConfigError("detector: required for the single_detector configuration")
    if configuration == "hbt" and hbt is None:
        raise ConfigError("hbt: required for the hbt configuration")
    fit = doc.get("fit", "none")
    if fit not in _FITS:
        raise ConfigError(f"fit: must be one of {_FITS}")
    return ExperimentConfig(
        source=source, configuration=configuration,
        duration=seconds_to_ticks(duration_s),
        seed=int(_need(doc, "seed", "seed")),
        correlation=cspec, detector=detector, hbt=hbt, fit=fit,
        save_streams=bool(doc.get("save_streams", False)), name=name)


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    """Load and validate a JSON config file.

    JSON syntax errors keep their line/column; semantic errors carry the
    JSON path of the offending field.
    """
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from None
    if overrides:
        doc.update(overrides)
    return parse_config(doc, name=os.path.splitext(os.path.basename(path))[0])
