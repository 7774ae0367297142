import numpy as np
import pytest
from PIL import Image

from strobo.cli import main
from strobo.frame_io import read_image
from strobo.pipeline import PipelineConfig, coerce, read_config_file, run_strobe_pipeline
from strobo.synth import SceneSpec, write_scene
from strobo.exceptions import InvalidArgument


@pytest.fixture(scope="module")
def scene(tmp_path_factory):
    d = tmp_path_factory.mktemp("scene")
    spec = SceneSpec(width=160, height=96, n_frames=50, disk_radius=6, start=(15, 48), velocity=(2.6, 0), noise_sigma=1.0, seed=4)
    write_scene(spec, d / "f%05d.ppm")
    write_scene(spec, d / "clip.y4m")
    return d


def test_strobe_with_debug(scene, tmp_path):
    out, dbg = tmp_path / "s.png", tmp_path / "dbg"
    assert main(["strobe", "--input", str(scene / "f%05d.ppm"), "--output", str(out), "--debug-dir", str(dbg)]) == 0
    assert read_image(out).shape == (96, 160, 3)
    for name in ("background.png", "blobs.csv", "selection.txt", "config.txt", "mask_00000.png", "mask_00049.png"):
        assert (dbg / name).exists(), name
    rows = (dbg / "blobs.csv").read_text().splitlines()
    assert rows[0] == "frame,timestamp,area,cx,cy,mu20,mu02,mu11" and len(rows) > 40
    chosen = (dbg / "selection.txt").read_text().split("\n")
    assert 5 <= len([c for c in chosen if c]) <= 10


def test_y4m_input(scene, tmp_path):
    assert main(["strobe", "--input", str(scene / "clip.y4m"), "--output", str(tmp_path / "s.ppm")]) == 0


def test_deterministic(scene, tmp_path):
    a, b = tmp_path / "a.png", tmp_path / "b.png"
    for p in (a, b):
        assert main(["strobe", "--input", str(scene / "f%05d.ppm"), "--output", str(p), "--downscale", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_static_scene_exit_3(tmp_path):
    write_scene(SceneSpec(width=64, height=48, n_frames=10, disk_radius=4, start=(20, 20), velocity=(0, 0)), tmp_path / "f%03d.png")
    # a disk that never moves is absorbed into the background
    assert main(["strobe", "--input", str(tmp_path / "f%03d.png"), "--output", str(tmp_path / "o.png")]) == 3


@pytest.mark.parametrize("name", ["missing.y4m", "missing.png", "nope_%05d.ppm"])
def test_missing_input_exit_2(tmp_path, name):
    assert main(["strobe", "--input", str(tmp_path / name), "--output", str(tmp_path / "o.png")]) == 2


def test_corrupt_input_exit_2(tmp_path):
    (tmp_path / "bad.y4m").write_bytes(b"YUV4MPEG2 W4 H4 C444\nFRAME\n" + bytes(48))
    assert main(["strobe", "--input", str(tmp_path / "bad.y4m"), "--output", str(tmp_path / "o.png")]) == 2


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["strobe"],
        ["strobe", "--input", "x.y4m", "--alpha", "2"],
        ["strobe", "--input", "x.y4m", "--downscale", "0"],
        ["strobe", "--input", "x.y4m", "--threshold", "maybe"],
        ["strobe", "--input", "x.y4m", "--output", "x.jpg"],
        ["strobe", "--input", "x.y4m", "--bogus", "1"],
    ],
)
def test_usage_exit_1(argv):
    assert main(argv) == 1


def test_config_file_and_override(scene, tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text(f"# settings\ninput={scene / 'f%05d.ppm'}\noutput={tmp_path / 'x.png'}\ndmin=20\n")
    assert read_config_file(cfg)["dmin"] == "20"
    dbg = tmp_path / "dbg"
    assert main(["strobe", "--config", str(cfg), "--dmin", "40", "--debug-dir", str(dbg)]) == 0
    lines = (dbg / "config.txt").read_text().splitlines()
    assert "dmin=40.0" in lines and any(l.startswith("input=") and "f%05d" in l for l in lines)


def test_bad_config_key(tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("nonsense=1\n")
    assert main(["strobe", "--config", str(cfg)]) == 1
    with pytest.raises(InvalidArgument):
        coerce("alpha", "fast")


def test_bgmodel(scene, tmp_path):
    out = tmp_path / "bg.png"
    assert main(["bgmodel", "--input", str(scene / "f%05d.ppm"), "--output", str(out)]) == 0
    bg = read_image(out)
    from strobo.synth import background_pattern

    spec = SceneSpec(width=160, height=96, n_frames=50, disk_radius=6, start=(15, 48), velocity=(2.6, 0))
    assert np.abs(bg.astype(int) - background_pattern(spec).astype(int)).mean() < 2


def test_masks(scene, tmp_path):
    assert main(["masks", "--input", str(scene / "f%05d.ppm"), "--output", str(tmp_path / "m")]) == 0
    files = sorted((tmp_path / "m").glob("mask_*.png"))
    assert len(files) == 50
    assert (np.asarray(Image.open(files[30])) > 0).sum() > 50


def test_synth_cli(tmp_path):
    assert main(["synth", "--output", str(tmp_path / "v" / "f%04d.png"), "--frames", "6", "--masks-dir", str(tmp_path / "gt")]) == 0
    assert len(list((tmp_path / "v").glob("*.png"))) == 6 and len(list((tmp_path / "gt").glob("*.png"))) == 6
    assert main(["synth", "--output", str(tmp_path / "o.y4m"), "--frames", "500"]) == 1


def test_library_result(scene):
    res = run_strobe_pipeline(PipelineConfig(input=str(scene / "f%05d.ppm"), output=str(scene / "lib.png")))
    assert res.status == 0 and 5 <= len(res.selection) <= 10
    for idx in res.selection.chosen:
        assert idx in res.masks and res.masks[idx].any()
