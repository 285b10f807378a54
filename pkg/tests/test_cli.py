import json
import subprocess
import sys

import numpy as np
import pytest
from scipy.ndimage import binary_erosion

from fluxct.cli import PipelineConfig, main
from fluxct.physics import Material, build_phantom, kramers_spectrum, linear_attenuation, water_table
from fluxct.projector import read_sinogram
from fluxct.recon import ImageGrid, Semantics, read_image, write_image

SMALL = dict(resolution=64, n_angles=90, angle_step=2.0, entropy_size=32)


def write_config(tmp_path, **overrides):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({**SMALL, **overrides}))
    return str(path)


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def small_stack(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("stack")
    cfg = write_config(tmp)
    out = tmp / "out"
    for cmd in ("simulate", "reconstruct", "enhance"):
        assert run(cmd, "--config", cfg, "--out", out) == 0
    return tmp, out, cfg


def test_usage_errors_exit_one(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--seed", "x"])
    assert exc.value.code == 1
    assert run("simulate", "--measures", "bogus", "--out", tmp_path) == 1
    err = capsys.readouterr().err
    assert "bogus" in err and "sampen" in err


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"resolution": 64, "colour": "red"}')
    assert run("simulate", "--config", cfg, "--out", tmp_path) == 2
    assert "colour" in capsys.readouterr().err


def test_corrupt_header_exit_two(tmp_path, capsys):
    bad = tmp_path / "bad.sino"
    bad.write_text("SINOGRAM 3 4\n1 2 3 4\n")
    assert run("reconstruct", bad, "--out", tmp_path) == 2
    err = capsys.readouterr().err
    assert "bad.sino" in err and "SINO" in err


def test_module_entry_point(tmp_path):
    res = subprocess.run(
        [sys.executable, "-m", "fluxct", "reconstruct", str(tmp_path / "missing.sino"), "--out", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert res.returncode == 2 and "missing.sino" in res.stderr


def test_default_sinogram_shape(tmp_path):
    assert run("simulate", "--mono", 70, "--out", tmp_path) == 0
    sino = read_sinogram(tmp_path / "sinogram.sino")
    assert sino.data.shape == (360, 256)
    rec = json.loads((tmp_path / "simulate.json").read_text())
    assert rec["spectrum"]["kind"] == "monochromatic"
    assert "out" not in rec["config"]


def test_env_sets_default_out(tmp_path, monkeypatch):
    monkeypatch.setenv("FLUXCT_OUT", str(tmp_path / "env"))
    assert run("simulate", "--config", write_config(tmp_path)) == 0
    assert (tmp_path / "env" / "sinogram.sino").is_file()


def test_flags_override_config(tmp_path):
    cfg = write_config(tmp_path, kvp=100.0, seed=3)
    assert run("simulate", "--config", cfg, "--kvp", 120, "--out", tmp_path) == 0
    rec = json.loads((tmp_path / "simulate.json").read_text())
    assert rec["config"]["kvp"] == 120.0 and rec["seed"] == 3


def test_zero_sinogram_gives_zero_image(tmp_path):
    rows = "\n".join(" ".join(["0"] * 32) for _ in range(45))
    (tmp_path / "z.sino").write_text(f"SINO 45 32 4 0.5\n{rows}\n")
    assert run("reconstruct", tmp_path / "z.sino", "--out", tmp_path) == 0
    img = read_image(tmp_path / "pam.img")
    assert img.shape == (32, 32) and not np.any(img.data)


def test_round_trip_water_mean(small_stack):
    _, out, _ = small_stack
    pam = read_image(out / "pam.img")
    phantom = build_phantom(SMALL["resolution"])
    water = binary_erosion(phantom.mask(Material.WATER), iterations=3)
    spectrum = kramers_spectrum(prefilter_water_cm=15.0)
    expected = linear_attenuation(water_table(), spectrum.mean_energy())
    assert pam.data[water].mean() == pytest.approx(expected, rel=0.10)


def test_enhance_manifest(small_stack):
    _, out, _ = small_stack
    m = json.loads((out / "stack" / "manifest.json").read_text())
    assert len(m["intervals"]) == 11
    assert m["sum_q"] == pytest.approx(1.0, abs=1e-12)
    energies = [r["effective_energy_kev"] for r in m["intervals"]]
    assert energies == sorted(energies)
    for r in m["intervals"]:
        hu = read_image(out / "stack" / r["hu"])
        whu = read_image(out / "stack" / r["whu"])
        assert hu.semantics is Semantics.HOUNSFIELD
        assert np.allclose(whu.data, r["q"] * hu.data, rtol=1e-9, atol=1e-9)


def test_analyze_error_record_and_continue(tmp_path):
    const = tmp_path / "flat.img"
    write_image(const, ImageGrid(np.full((16, 16), 3.0), 0.1, Semantics.HOUNSFIELD))
    noisy = tmp_path / "noisy.img"
    write_image(noisy, ImageGrid(np.random.default_rng(0).random((16, 16)), 0.1, Semantics.HOUNSFIELD))
    cfg = write_config(tmp_path, entropy_size=16)
    assert run("analyze", const, noisy, "--measures", "sampen,lz", "--config", cfg, "--out", tmp_path) == 0
    records = json.loads((tmp_path / "report.json").read_text())["analysis"]["records"]
    flat = [r for r in records if r["image"] == "flat.img" and r["measure"] == "sampen"][0]
    assert "insufficient matches" in flat["error"]
    assert any(r["image"] == "noisy.img" and "value" in r for r in records)


def test_analyze_stack_cardinality(small_stack, tmp_path):
    _, out, cfg = small_stack
    dest = tmp_path / "a"
    args = ("analyze", out / "stack" / "manifest.json", "--measures", "lzw,bdm,permen", "--config", cfg, "--out", dest)
    assert run(*args) == 0
    report = json.loads((dest / "report.json").read_text())["analysis"]
    for measure in ("lzw", "bdm", "permen"):
        whu = [r for r in report["records"] if r["measure"] == measure and r["role"] == "whu"]
        assert len(whu) == 11 and all("value" in r for r in whu)
    assert (dest / "plots" / "bdm.tsv").is_file()
    first = (dest / "report.json").read_bytes()
    assert run(*args) == 0
    assert (dest / "report.json").read_bytes() == first


def test_segment_clusters_and_determinism(small_stack, tmp_path):
    _, out, cfg = small_stack
    manifest = out / "stack" / "manifest.json"
    runs = []
    for name in ("s1", "s2"):
        dest = tmp_path / name
        assert run("segment", manifest, "--seed", 5, "--config", cfg, "--out", dest) == 0
        runs.append((dest / "report.json").read_bytes())
    assert runs[0] == runs[1]
    seg = json.loads(runs[0])["segmentation"]
    cct = [r for r in seg["records"] if r["role"] == "cct"][0]
    assert cct["metrics"]["mse"] == 0 and cct["metrics"]["psnr"] == 99.0 and cct["metrics"]["ssim"] == 1.0
    hu70 = min((r for r in seg["records"] if r["role"] == "hu"), key=lambda r: abs(r["energy_kev"] - 70))
    assert len(hu70["cluster_sizes"]) == 4 and min(hu70["cluster_sizes"]) > 0


def test_segment_without_reference(tmp_path):
    img = tmp_path / "i.img"
    write_image(img, ImageGrid(np.random.default_rng(1).random((8, 8)), 0.1))
    assert run("segment", img, "--out", tmp_path) == 1


def test_config_defaults_match_dataclass():
    cfg = PipelineConfig()
    assert cfg.n_angles == 360 and cfg.resolution == 256 and cfg.fcm_c == 4
