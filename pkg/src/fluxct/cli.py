"""Command-line pipeline: simulate, reconstruct, enhance, analyze, segment.

Every command writes its outputs atomically under one output directory and
records the resolved configuration in a JSON manifest. Reports are JSON with
sorted keys and no timestamps, so reruns with the same inputs, configuration
and seed are byte-identical.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from ._textio import fmt, write_atomic
from .complexity import bdm as _bdm
from .complexity import entropy as _ent
from .complexity import lz as _lz
from .complexity import morphology as _mr
from .complexity import stats as _st
from .enhance import CONVENTIONAL_ENERGY_KEV, enhance_pipeline
from .errors import DataError, FluxCTError, NumericError
from .physics import (
    DEFAULT_KVP,
    DEFAULT_PREFILTER_WATER_CM,
    build_phantom,
    kramers_spectrum,
    monochromatic_spectrum,
    water_table,
)
from .projector import (
    Mode,
    fan_geometry,
    fan_to_parallel_rebin,
    mono_projection,
    parallel_geometry,
    poly_projection,
    read_sinogram,
    write_sinogram,
)
from .recon import CLINICAL_HU_RANGE, ImageGrid, Semantics, inverse_radon, read_image, to_uint8, write_image
from .segmentation import FSIM_CONSTANTS, fcm, ordered_labels, quality_metrics
from .spectrum_quant import (
    assign_weights,
    default_intervals,
    fitted_interval_set,
    paper_interval_set,
    read_intervals,
)

log = logging.getLogger("fluxct")

ENV_OUT = "FLUXCT_OUT"
DEFAULT_OUT = "fluxct_out"

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

MEASURES = (
    "scott",
    "correlation",
    "lz",
    "lzw",
    "bdm",
    "apen",
    "sampen",
    "fuzzyen",
    "permen",
    "cce",
    "condent",
    "mr",
)


class UsageError(FluxCTError):
    """Invalid command-line or configuration settings."""


# -- configuration ------------------------------------------------------------


@dataclass
class PipelineConfig:
    """Every tunable of the pipeline. Keys of a ``--config`` JSON file must be field names."""

    resolution: int = 256
    extent: float = 12.0
    mode: str = "parallel"
    n_angles: int = 360
    angle_step: float = 1.0
    fan_angle: float = 6.8
    source_distance: float = 150.0
    kvp: float = DEFAULT_KVP
    prefilter_water_cm: float = DEFAULT_PREFILTER_WATER_CM
    mono: float | None = None
    intervals: str = "paper"
    measures: str = "all"
    entropy_m: int = 2
    entropy_r_factor: float = 0.2
    fuzzy_n: int = 2
    perm_order: int = 4
    cce_bins: int = 6
    cce_l_max: int = 8
    entropy_size: int = 64
    bdm_block: int = 2
    bdm_q: int = 256
    mr_thresholds: int = 64
    lowess_frac: float = 0.9
    fcm_c: int = 4
    fcm_m: float = 2.0
    fcm_tol: float = 1e-5
    fcm_max_iter: int = 300
    seed: int = 0
    out: str | None = field(default=None, repr=False)

    def measure_list(self):
        names = [m.strip() for m in self.measures.split(",") if m.strip()]
        if names == ["all"]:
            return list(MEASURES)
        bad = [m for m in names if m not in MEASURES]
        if bad or not names:
            raise UsageError(f"unknown measure(s) {', '.join(bad) or '(none)'}; valid: all, {', '.join(MEASURES)}")
        return [m for m in MEASURES if m in names]

    def validate(self):
        if self.resolution < 32:
            raise UsageError("resolution must be >= 32")
        if self.mode not in ("parallel", "fan"):
            raise UsageError("mode must be 'parallel' or 'fan'")
        if self.intervals not in ("paper", "fit") and not Path(self.intervals).is_file():
            raise UsageError(f"intervals must be 'paper', 'fit' or an existing file, got {self.intervals!r}")
        if self.entropy_size < 8:
            raise UsageError("entropy_size must be >= 8")
        self.measure_list()
        return self

    def recorded(self):
        """Configuration as stored in manifests; the output location is left out."""
        d = asdict(self)
        d.pop("out")
        return d


_NULLABLE = {"mono", "out"}


def _coerce(name, value, default):
    if value is None and name in _NULLABLE:
        return None
    kind = type(default) if default is not None else (float if name == "mono" else str)
    if kind is bool or isinstance(value, bool):
        raise DataError(f"config key {name!r}: booleans are not accepted")
    if kind is int:
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if not isinstance(value, int):
            raise DataError(f"config key {name!r} must be an integer")
        return value
    if kind is float:
        if not isinstance(value, (int, float)):
            raise DataError(f"config key {name!r} must be a number")
        return float(value)
    if not isinstance(value, str):
        raise DataError(f"config key {name!r} must be a string")
    return value


def load_config_file(path):
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise DataError(f"{path}: config must be a JSON object")
    defaults = {f.name: f.default for f in fields(PipelineConfig)}
    unknown = sorted(set(raw) - set(defaults))
    if unknown:
        raise DataError(f"{path}: unknown config key(s): {', '.join(unknown)}")
    return {k: _coerce(k, v, defaults[k]) for k, v in raw.items()}


def resolve_config(args):
    """Built-in defaults, then the config file, then command-line flags."""
    values = {}
    if getattr(args, "config", None):
        values.update(load_config_file(args.config))
    for name in ("seed", "out", "intervals", "measures", "kvp", "mono"):
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    cfg = replace(PipelineConfig(), **values)
    if cfg.out is None:
        cfg.out = os.environ.get(ENV_OUT) or DEFAULT_OUT
    return cfg.validate()


# -- shared helpers -----------------------------------------------------------


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _dump_json(path, obj):
    write_atomic(path, json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n")


def _spectrum(cfg):
    if cfg.mono is not None:
        return monochromatic_spectrum(cfg.mono)
    return kramers_spectrum(cfg.kvp, prefilter_water_cm=cfg.prefilter_water_cm)


def _spectrum_record(cfg, spectrum):
    rec = dict(mean_energy_kev=spectrum.mean_energy())
    if cfg.mono is not None:
        rec.update(kind="monochromatic", energy_kev=cfg.mono)
    else:
        rec.update(kind="kramers", kvp=cfg.kvp, prefilter_water_cm=cfg.prefilter_water_cm)
    return rec


def _geometry(cfg, phantom):
    if cfg.mode == "fan":
        return fan_geometry(cfg.resolution, cfg.n_angles, cfg.angle_step, cfg.fan_angle, cfg.source_distance)
    return parallel_geometry(phantom, cfg.n_angles, cfg.angle_step)


def _intervals(cfg):
    if cfg.intervals == "paper":
        return paper_interval_set()
    if cfg.intervals == "fit":
        return fitted_interval_set(default_intervals())[0]
    ivs = read_intervals(cfg.intervals)
    if any(iv.effective_energy is None for iv in ivs):
        fitted, _ = fitted_interval_set(ivs)
        ivs = type(ivs)(tuple(a if a.effective_energy is not None else b for a, b in zip(ivs, fitted)))
    return ivs


def _num(x):
    """Plain float for JSON; non-finite values become None."""
    x = float(x)
    return x if math.isfinite(x) else None


# -- simulate / reconstruct / enhance -----------------------------------------


def cmd_simulate(cfg, args=None):
    out = Path(cfg.out)
    phantom = build_phantom(cfg.resolution, cfg.extent)
    geom = _geometry(cfg, phantom)
    spectrum = _spectrum(cfg)
    if cfg.mono is not None:
        sino = mono_projection(phantom, geom, cfg.mono)
    else:
        sino = poly_projection(phantom, geom, spectrum)
    path = out / "sinogram.sino"
    write_sinogram(path, sino)
    _dump_json(
        out / "simulate.json",
        dict(
            command="simulate",
            version=__version__,
            config=cfg.recorded(),
            seed=cfg.seed,
            geometry=dict(
                mode=geom.mode.value,
                n_angles=geom.n_angles,
                angle_step_deg=geom.angle_step,
                n_detectors=geom.n_detectors,
                detector_spacing_mm=geom.detector_spacing,
                fan_angle_deg=geom.fan_angle,
                source_distance_mm=geom.source_distance,
            ),
            spectrum=_spectrum_record(cfg, spectrum),
            outputs={path.name: _sha256(path)},
        ),
    )
    return path


def cmd_reconstruct(cfg, sino_path=None):
    out = Path(cfg.out)
    sino_path = Path(sino_path) if sino_path else out / "sinogram.sino"
    sino = read_sinogram(sino_path)
    rebinned = sino.geometry.mode is Mode.FAN
    if rebinned:
        sino = fan_to_parallel_rebin(sino)
    pam = inverse_radon(sino)
    path = out / "pam.img"
    write_image(path, pam)
    _dump_json(
        out / "reconstruct.json",
        dict(
            command="reconstruct",
            version=__version__,
            config=cfg.recorded(),
            seed=cfg.seed,
            inputs={sino_path.name: _sha256(sino_path)},
            rebinned_from_fan=rebinned,
            outputs={path.name: _sha256(path)},
        ),
    )
    return path


def cmd_enhance(cfg, pam_path=None):
    out = Path(cfg.out)
    pam_path = Path(pam_path) if pam_path else out / "pam.img"
    pam = read_image(pam_path)
    spectrum = _spectrum(cfg)
    ivs = assign_weights(_intervals(cfg), spectrum)
    stack = enhance_pipeline(pam, ivs, water_table())
    sdir = out / "stack"
    write_image(sdir / "cct.img", stack.conventional)
    records = []
    for i, (iv, hu, whu) in enumerate(zip(stack.intervals, stack.per_interval_hu, stack.per_interval_weighted)):
        hu_name, whu_name = f"hu_{i:02d}.img", f"whu_{i:02d}.img"
        write_image(sdir / hu_name, hu)
        write_image(sdir / whu_name, whu)
        records.append(
            dict(
                index=i,
                lo_kev=iv.lo,
                hi_kev=iv.hi,
                effective_energy_kev=iv.effective_energy,
                mu_w_per_cm=iv.mu_w,
                q=iv.weight_q,
                hu=hu_name,
                whu=whu_name,
            )
        )
    manifest = sdir / "manifest.json"
    _dump_json(
        manifest,
        dict(
            command="enhance",
            version=__version__,
            config=cfg.recorded(),
            seed=cfg.seed,
            inputs={pam_path.name: _sha256(pam_path)},
            spectrum=_spectrum_record(cfg, spectrum),
            conventional=dict(file="cct.img", energy_kev=CONVENTIONAL_ENERGY_KEV, mu_w_per_cm=stack.conventional_mu_w),
            intervals=records,
            sum_q=float(sum(r["q"] for r in records)),
        ),
    )
    return manifest


# -- inputs for analyze / segment ---------------------------------------------


@dataclass
class Entry:
    name: str
    role: str
    energy: float | None
    image: ImageGrid


_ROLE_OF = {
    Semantics.HOUNSFIELD: "hu",
    Semantics.WEIGHTED_HOUNSFIELD: "whu",
    Semantics.LINEAR_ATTENUATION: "pam",
    Semantics.LABELS: "labels",
}


def load_inputs(paths, reference=None):
    """Images to analyse plus the reference image (the stack's CCT by default).

    A ``.json`` path is read as an enhance manifest and expands to the
    conventional image followed by every HU_i and wHU_i.
    """
    entries = []
    ref = None
    for p in map(Path, paths):
        if p.suffix == ".json":
            try:
                m = json.loads(p.read_text(encoding="utf-8"))
                conv = m["conventional"]
                rows = m["intervals"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DataError(f"{p}: not a stack manifest ({exc})") from None
            base = p.parent
            cct = Entry(conv["file"], "cct", conv["energy_kev"], read_image(base / conv["file"]))
            entries.append(cct)
            ref = ref or cct
            for role in ("hu", "whu"):
                for r in rows:
                    entries.append(Entry(r[role], role, r["effective_energy_kev"], read_image(base / r[role])))
        else:
            img = read_image(p)
            entries.append(Entry(p.name, _ROLE_OF[img.semantics], None, img))
    if reference is not None:
        rp = Path(reference)
        ref = Entry(rp.name, "reference", None, read_image(rp))
    if not entries:
        raise UsageError("no input images")
    return entries, ref


# -- analyze ------------------------------------------------------------------


def downsample(data, size):
    """Block-mean reduction to at most `size` x `size` pixels."""
    h, w = data.shape
    f = max(1, math.ceil(max(h, w) / size))
    if f == 1:
        return data
    hh, ww = (h // f) * f, (w // f) * f
    return data[:hh, :ww].reshape(hh // f, f, ww // f, f).mean(axis=(1, 3))


def _render(entry):
    if entry.image.semantics in (Semantics.HOUNSFIELD, Semantics.WEIGHTED_HOUNSFIELD):
        return to_uint8(entry.image, CLINICAL_HU_RANGE), list(CLINICAL_HU_RANGE)
    return to_uint8(entry.image, None), None


class _Analysis:
    """Per-image measure evaluation with shared intermediate results."""

    def __init__(self, cfg, reference):
        self.cfg = cfg
        self.reference = reference
        self.ctm = _bdm.shipped_ctm(cfg.bdm_block)

    def _need_reference(self):
        if self.reference is None:
            raise DataError("measure needs a reference image (pass a stack manifest or --reference)")
        return self.reference.image

    def _small(self, entry):
        return _st.as_series(downsample(entry.image.data, self.cfg.entropy_size))

    def _r(self, series):
        return self.cfg.entropy_r_factor * float(np.std(series))

    def scott(self, entry):
        h, k = _st.scott_bins(entry.image)
        return {}, dict(h=h, k=k), None

    def correlation(self, entry):
        ref = self._need_reference()
        kind = "G" if entry.role == "whu" else "D"
        value = _st.pearson(entry.image, ref)
        centres, values = _st.binned_correlation(entry.image, ref)
        return dict(kind=kind), value, dict(bins=[[_num(c), _num(v)] for c, v in zip(centres, values)])

    def lz(self, entry):
        bits = _lz.binarize_by_mean(entry.image)
        return dict(threshold="mean"), _lz.lz_complexity(bits), None

    def lzw(self, entry):
        img, rng = _render(entry)
        return dict(render_range=rng, code_bits=_lz.LZW_CODE_BITS), _lz.lzw_compressed_length(img.tobytes()), None

    def bdm(self, entry):
        img, rng = _render(entry)
        cfg = self.cfg
        value = _bdm.layered_bdm(img, self.ctm, q=cfg.bdm_q, value_range=(0, 255))
        return dict(render_range=rng, block=cfg.bdm_block, q=cfg.bdm_q), value, None

    def apen(self, entry):
        s = self._small(entry)
        r = self._r(s)
        return dict(m=self.cfg.entropy_m, r=r, n=s.size), _ent.approximate_entropy(s, self.cfg.entropy_m, r), None

    def sampen(self, entry):
        s = self._small(entry)
        r = self._r(s)
        return dict(m=self.cfg.entropy_m, r=r, n=s.size), _ent.sample_entropy(s, self.cfg.entropy_m, r), None

    def fuzzyen(self, entry):
        s = self._small(entry)
        r = self._r(s)
        cfg = self.cfg
        params = dict(m=cfg.entropy_m, n_grad=cfg.fuzzy_n, r=r, n=s.size)
        return params, _ent.fuzzy_entropy(s, cfg.entropy_m, cfg.fuzzy_n, r), None

    def permen(self, entry):
        s = self._small(entry)
        return dict(order=self.cfg.perm_order, n=s.size), _ent.permutation_entropy(s, self.cfg.perm_order), None

    def cce(self, entry):
        s = self._small(entry)
        cfg = self.cfg
        value, profile = _ent.corrected_conditional_entropy(s, cfg.cce_l_max, cfg.cce_bins)
        return dict(bins=cfg.cce_bins, l_max=cfg.cce_l_max, n=s.size), value, dict(profile=profile)

    def condent(self, entry):
        ref = self._need_reference()
        joint = _ent.joint_counts(_st.digitize_scott(entry.image), _st.digitize_scott(ref))
        return dict(binning="scott", target="reference"), _ent.conditional_entropy(joint), None

    def mr(self, entry):
        n = self.cfg.mr_thresholds
        signal = _mr.mr_signal(entry.image, n)
        power = _mr.power_spectrum(signal)
        data = entry.image.data
        value = _mr.morphological_richness(data >= data.mean())
        return dict(n_thresholds=n), value, dict(signal=signal.tolist(), power=power.tolist())

    def run(self, entry, measure):
        rec = dict(image=entry.name, role=entry.role, energy_kev=entry.energy, measure=measure)
        try:
            params, value, detail = getattr(self, measure)(entry)
        except FluxCTError as exc:
            rec["error"] = str(exc)
            return rec
        rec["params"] = params
        rec["value"] = {k: _num(v) for k, v in value.items()} if isinstance(value, dict) else _num(value)
        if detail is not None:
            rec["detail"] = detail
        return rec


def _update_report(out, section, payload):
    path = Path(out) / "report.json"
    report = {}
    if path.exists():
        try:
            report = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{exc.lineno}: existing report is not valid JSON") from None
    report[section] = payload
    report["version"] = __version__
    _dump_json(path, report)
    return path


def _input_record(entries, ref):
    rec = [dict(image=e.name, role=e.role, energy_kev=e.energy) for e in entries]
    return dict(images=rec, reference=None if ref is None else ref.name)


def cmd_analyze(cfg, paths, reference=None):
    entries, ref = load_inputs(paths, reference)
    measures = cfg.measure_list()
    job = _Analysis(cfg, ref)
    records = [job.run(e, m) for e in entries for m in measures]
    _update_report(
        cfg.out,
        "analysis",
        dict(config=cfg.recorded(), seed=cfg.seed, measures=measures, inputs=_input_record(entries, ref), records=records),
    )
    write_analysis_plots(Path(cfg.out) / "plots", records, cfg.lowess_frac)
    return records


# -- segment ------------------------------------------------------------------


def _segment_one(cfg, image):
    res = fcm(image, cfg.fcm_c, cfg.fcm_m, cfg.fcm_tol, cfg.fcm_max_iter, cfg.seed)
    labels = ordered_labels(res).reshape(image.shape)
    return res, image.with_data(labels.astype(float), Semantics.LABELS)


def cmd_segment(cfg, paths, reference=None):
    entries, ref = load_inputs(paths, reference)
    if ref is None:
        raise UsageError("segment needs a reference image (pass a stack manifest or --reference)")
    ldir = Path(cfg.out) / "labels"
    ref_labels = None
    ref_error = None
    try:
        _, ref_labels = _segment_one(cfg, ref.image)
    except FluxCTError as exc:
        ref_error = str(exc)
    records = []
    for e in entries:
        rec = dict(image=e.name, role=e.role, energy_kev=e.energy)
        try:
            res, labels = _segment_one(cfg, e.image)
        except FluxCTError as exc:
            rec["error"] = str(exc)
            records.append(rec)
            continue
        name = Path(e.name).stem + ".labels.img"
        write_image(ldir / name, labels)
        rec.update(
            labels=name,
            centers=sorted(float(c) for c in res.centers),
            n_iter=res.n_iter,
            objective=res.objective_trace[-1],
            cluster_sizes=np.bincount(labels.data.astype(np.int64).ravel(), minlength=cfg.fcm_c).tolist(),
        )
        if ref_labels is None:
            rec["metrics_error"] = f"reference segmentation failed: {ref_error}"
        else:
            try:
                rec["metrics"] = {k: (_num(v) if not isinstance(v, bool) else v)
                                  for k, v in quality_metrics(labels, ref_labels).items()}
            except FluxCTError as exc:
                rec["metrics_error"] = str(exc)
        records.append(rec)
    fcm_params = dict(c=cfg.fcm_c, m=cfg.fcm_m, tol=cfg.fcm_tol, max_iter=cfg.fcm_max_iter, seed=cfg.seed)
    _update_report(
        cfg.out,
        "segmentation",
        dict(
            config=cfg.recorded(),
            seed=cfg.seed,
            fcm=fcm_params,
            fsim_constants=FSIM_CONSTANTS,
            metric_inputs="FCM label images, min-max normalised to [0, 1], dynamic range 1",
            inputs=_input_record(entries, ref),
            records=records,
        ),
    )
    write_segmentation_plot(Path(cfg.out) / "plots", records)
    return records


# -- plot data ----------------------------------------------------------------


def _cell(x):
    if x is None:
        return "NA"
    if isinstance(x, str):
        return x
    return fmt(x) if math.isfinite(x) else "NA"


def _write_tsv(path, header, rows, comment):
    lines = [f"# {comment}", "\t".join(header)]
    lines += ["\t".join(_cell(c) for c in row) for row in rows]
    write_atomic(path, "\n".join(lines) + "\n")


def _sort_key(row):
    return (row[1], math.inf if row[2] is None else row[2], row[0])


def _value(rec, key=None):
    v = rec.get("value")
    if isinstance(v, dict):
        return v.get(key)
    return v


def _with_lowess(rows, col, frac):
    """Append a LOWESS fit of column `col` against energy, per role."""
    out = [list(r) + [None] for r in rows]
    roles = sorted({r[1] for r in rows})
    for role in roles:
        idx = [i for i, r in enumerate(rows) if r[1] == role and r[2] is not None and r[col] is not None]
        if len(idx) < 3:
            continue
        x = np.array([rows[i][2] for i in idx], dtype=float)
        y = np.array([rows[i][col] for i in idx], dtype=float)
        if np.ptp(x) == 0:
            continue
        fitted = _st.lowess(x, y, frac)
        for i, f in zip(idx, fitted):
            out[i][-1] = float(f)
    return out


def write_analysis_plots(pdir, records, lowess_frac=0.9):
    by_image = {}
    for rec in records:
        key = (rec["image"], rec["role"], rec["energy_kev"])
        by_image.setdefault(key, {})[rec["measure"]] = rec
    images = sorted(by_image, key=_sort_key)
    comment = "x = effective energy (keV); NA marks undefined or failed values"

    def have(m):
        return any(m in by_image[k] for k in images)

    ent = [m for m in ("apen", "sampen", "fuzzyen", "permen", "cce", "condent") if have(m)]
    if ent:
        rows = [list(k) + [_value(by_image[k][m]) if m in by_image[k] else None for m in ent] for k in images]
        _write_tsv(pdir / "entropies.tsv", ["image", "role", "energy_kev", *ent], rows, comment)
    for m, col in (("bdm", "bdm_bits"), ("lzw", "lzw_bits"), ("lz", "c_k")):
        if have(m):
            rows = [list(k) + [_value(by_image[k][m]) if m in by_image[k] else None] for k in images]
            rows = _with_lowess(rows, 3, lowess_frac)
            _write_tsv(pdir / f"{m}.tsv", ["image", "role", "energy_kev", col, "lowess"], rows, comment)
    if have("correlation"):
        rows, bins = [], []
        for k in images:
            rec = by_image[k].get("correlation")
            if rec is None:
                continue
            kind = rec.get("params", {}).get("kind")
            rows.append(list(k) + [kind, _value(rec)])
            for c, v in rec.get("detail", {}).get("bins", []):
                bins.append(list(k) + [c, v])
        _write_tsv(pdir / "correlation.tsv", ["image", "role", "energy_kev", "kind", "pearson"], rows, comment)
        _write_tsv(pdir / "correlation_bins.tsv", ["image", "role", "energy_kev", "bin_centre", "pearson"], bins,
                   "pearson against the reference within each Scott bin of the image")
    if have("mr"):
        rows, spec = [], []
        for k in images:
            rec = by_image[k].get("mr")
            if rec is None:
                continue
            rows.append(list(k) + [_value(rec)])
            for i, p in enumerate(rec.get("detail", {}).get("power", [])):
                spec.append(list(k) + [i, p])
        _write_tsv(pdir / "mr.tsv", ["image", "role", "energy_kev", "richness"], rows, comment)
        _write_tsv(pdir / "mr_spectrum.tsv", ["image", "role", "energy_kev", "k", "power"], spec,
                   "power spectrum of the threshold-sweep richness signal, one row per frequency bin")


def write_segmentation_plot(pdir, records):
    keys = ("mse", "psnr", "ssim", "fsim")
    rows = []
    for rec in records:
        metrics = rec.get("metrics", {})
        rows.append([rec["image"], rec["role"], rec["energy_kev"], *(metrics.get(k) for k in keys)])
    rows.sort(key=_sort_key)
    _write_tsv(pdir / "segmentation.tsv", ["image", "role", "energy_kev", *keys], rows,
               "x = effective energy (keV); metrics of FCM labels against the reference labels")


# -- pipeline -----------------------------------------------------------------


def cmd_pipeline(cfg):
    sino = cmd_simulate(cfg)
    pam = cmd_reconstruct(cfg, sino)
    manifest = cmd_enhance(cfg, pam)
    cmd_analyze(cfg, [manifest])
    cmd_segment(cfg, [manifest])
    return Path(cfg.out)


# -- argument parsing ---------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON file of configuration overrides")
    common.add_argument("--seed", type=int, help="random seed (FCM initialisation)")
    common.add_argument("--out", metavar="DIR", help=f"output directory (default ${ENV_OUT} or {DEFAULT_OUT})")
    common.add_argument("--intervals", metavar="SRC", help="'paper', 'fit' or an interval file")
    common.add_argument("--measures", metavar="LIST", help="comma-separated measures or 'all'")
    common.add_argument("--kvp", type=float, help="tube voltage (keV) of the Kramers spectrum")
    common.add_argument("--mono", type=float, metavar="KEV", help="simulate a monochromatic beam instead")

    parser = _Parser(prog="fluxct", description="Flux-weighted spectral CT simulation and complexity analysis.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    sub.add_parser("simulate", parents=[common], help="project the phantom into a sinogram")
    p = sub.add_parser("reconstruct", parents=[common], help="filtered back-projection of a sinogram")
    p.add_argument("sinogram", nargs="?", help="SINO file (default OUT/sinogram.sino)")
    p = sub.add_parser("enhance", parents=[common], help="per-interval HU and flux-weighted HU images")
    p.add_argument("pam", nargs="?", help="IMG file (default OUT/pam.img)")
    for name, text in (("analyze", "complexity measures"), ("segment", "FCM segmentation and quality metrics")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("inputs", nargs="+", help="IMG files or a stack manifest.json")
        p.add_argument("--reference", metavar="IMG", help="reference image (default: the stack's CCT)")
    sub.add_parser("pipeline", parents=[common], help="run every stage")
    return parser


def _dispatch(cfg, args):
    cmd = args.command
    if cmd == "simulate":
        cmd_simulate(cfg)
    elif cmd == "reconstruct":
        cmd_reconstruct(cfg, args.sinogram)
    elif cmd == "enhance":
        cmd_enhance(cfg, args.pam)
    elif cmd == "analyze":
        cmd_analyze(cfg, args.inputs, args.reference)
    elif cmd == "segment":
        cmd_segment(cfg, args.inputs, args.reference)
    else:
        cmd_pipeline(cfg)


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="fluxct: %(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        _dispatch(cfg, args)
    except UsageError as exc:
        print(f"fluxct: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"fluxct: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, OSError) as exc:
        print(f"fluxct: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
