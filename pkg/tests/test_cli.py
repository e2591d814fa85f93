import json
import subprocess
import sys

import numpy as np
import pytest
from PIL import Image

from fixtures import random_vgg, write_manifest, write_pair_dirs
from salicon.cli import main
from salicon.engine import shipped_netspec
from salicon.netgraph import MINI_BLOCKS
from salicon.weights import WeightStore, load, save, transplant_vgg
from salicon.netgraph import load_netspec

MINI = str(shipped_netspec("mini.netspec"))
MINI_TRAIN = str(shipped_netspec("mini_finetune.netspec"))


@pytest.fixture
def mini_model(tmp_path):
    store = transplant_vgg(random_vgg(0, MINI_BLOCKS), load_netspec(MINI), gaussian_std=0.05, bias_const=0.1)
    path = tmp_path / "mini.ntw"
    save(store, path)
    return path


@pytest.fixture
def image(tmp_path):
    rng = np.random.default_rng(4)
    path = tmp_path / "img.png"
    Image.fromarray(rng.integers(0, 256, (30, 45, 3), dtype=np.uint8), "RGB").save(path)
    return path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_compute_saliency(tmp_path, capsys, mini_model, image):
    out = tmp_path / "sal.png"
    code, _, err = run(capsys, "compute-saliency", "--model", mini_model, "--netspec", MINI,
                       "--image", image, "--out", out, "--raw-out", tmp_path / "sal.f32")
    assert code == 0
    header = err.splitlines()[0]
    assert header.startswith("# salicon compute-saliency ")
    assert json.loads(header.split(" ", 3)[3])["threshold"] is None
    with Image.open(out) as im:
        assert im.size == (45, 30) and im.mode == "L"
        pix = np.asarray(im)
    raw = np.fromfile(tmp_path / "sal.f32", "<f4").reshape(30, 45)
    assert np.all(np.abs(pix - 255.0 * raw) <= 0.5 + 1e-4)
    assert pix.min() < pix.max()


def test_zero_threshold_is_identity(tmp_path, capsys, mini_model, image):
    a, b = tmp_path / "a.png", tmp_path / "b.png"
    run(capsys, "compute-saliency", "--model", mini_model, "--netspec", MINI, "--image", image, "--out", a)
    run(capsys, "compute-saliency", "--model", mini_model, "--netspec", MINI, "--image", image, "--out", b,
        "--threshold", "0.0")
    assert a.read_bytes() == b.read_bytes()


def test_missing_model(tmp_path, capsys, image):
    missing = tmp_path / "missing.ntw"
    code, _, err = run(capsys, "compute-saliency", "--model", missing, "--netspec", MINI, "--image", image,
                       "--out", tmp_path / "o.png")
    assert code == 2
    assert str(missing) in err


def test_bad_image(tmp_path, capsys, mini_model):
    bad = tmp_path / "bad.png"
    bad.write_bytes(b"nope")
    code, _, err = run(capsys, "compute-saliency", "--model", mini_model, "--netspec", MINI, "--image", bad,
                       "--out", tmp_path / "o.png")
    assert code == 2 and "bad.png" in err


def test_model_spec_mismatch(tmp_path, capsys, mini_model, image):
    code, _, err = run(capsys, "compute-saliency", "--model", mini_model, "--image", image,
                       "--out", tmp_path / "o.png")
    assert code == 2 and "error:" in err


@pytest.mark.parametrize("argv", [
    ["compute-saliency", "--image", "x.png"],
    ["train", "--bogus"],
    ["gradcheck", "--seed", "abc"],
    ["gradcheck", "--seed", "-1"],
    ["transplant", "--vgg", "a", "--vgg-manifest", "b", "--out", "c"],
    ["frobnicate"],
    [],
])
def test_usage_errors(capsys, argv):
    assert main(argv) == 4


@pytest.fixture
def train_setup(tmp_path, mini_model):
    imgs, fixs = write_pair_dirs(tmp_path, ["a", "b", "c"], size=(20, 30))
    return imgs, fixs, mini_model


def _train(capsys, tmp_path, setup, *extra):
    imgs, fixs, weights = setup
    out = tmp_path / "trained.ntw"
    code, _, err = run(capsys, "train", "--netspec", MINI_TRAIN, "--weights", weights, "--images", imgs,
                       "--fixations", fixs, "--out", out, *extra)
    return code, out, err


def test_train_zero_updates(tmp_path, capsys, train_setup):
    code, out, _ = _train(capsys, tmp_path, train_setup, "--max-updates", "0")
    assert code == 0
    assert load(out) == load(train_setup[2])
    meta = json.loads((tmp_path / "trained.ntw.meta.json").read_text())
    assert meta["solver"]["max_updates"] == 0 and meta["samples"] == 3
    assert meta["preproc"]["channel_means"] == [103.939, 116.779, 123.68]


def test_train_progress_lines(tmp_path, capsys, train_setup):
    code, out, _ = _train(capsys, tmp_path, train_setup, "--max-updates", "5", "--base-lr", "1e-4",
                          "--train-fraction", "1.0")
    assert code == 0
    lines = (tmp_path / "trained.ntw.progress.csv").read_text().splitlines()
    assert len(lines) == 5
    epoch, index, sample_id, loss = lines[0].split(",")
    assert epoch == "0" and index == "0" and sample_id in "abc" and float(loss) > 0
    assert [ln.split(",")[0] for ln in lines] == ["0", "0", "0", "1", "1"]
    assert load(out) != load(train_setup[2])


def test_train_is_deterministic(tmp_path, capsys, train_setup):
    _train(capsys, tmp_path, train_setup, "--max-updates", "3", "--base-lr", "1e-4")
    first = (tmp_path / "trained.ntw").read_bytes()
    _train(capsys, tmp_path, train_setup, "--max-updates", "3", "--base-lr", "1e-4")
    assert (tmp_path / "trained.ntw").read_bytes() == first


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_train_divergence_exit_code(tmp_path, capsys, train_setup):
    code, out, err = _train(capsys, tmp_path, train_setup, "--max-updates", "500", "--base-lr", "1e3")
    assert code == 3
    assert "diverged" in err and out.is_file()


def test_train_rejects_inference_spec(tmp_path, capsys, train_setup):
    imgs, fixs, weights = train_setup
    code, _, err = run(capsys, "train", "--netspec", MINI, "--weights", weights, "--images", imgs,
                       "--fixations", fixs, "--out", tmp_path / "o.ntw", "--max-updates", "1")
    assert code == 2 and "loss" in err


@pytest.fixture(scope="module")
def vgg_manifest(tmp_path_factory):
    d = tmp_path_factory.mktemp("vgg")
    return write_manifest(random_vgg(2, fc=True), d)


def test_transplant(tmp_path, capsys, vgg_manifest):
    a, b = tmp_path / "a.ntw", tmp_path / "b.ntw"
    assert run(capsys, "transplant", "--vgg-manifest", vgg_manifest, "--seed", 7, "--out", a)[0] == 0
    assert run(capsys, "transplant", "--vgg-manifest", vgg_manifest, "--seed", 7, "--out", b)[0] == 0
    assert len(load(a)) == 54
    assert a.read_bytes() == b.read_bytes()


def test_transplant_missing_layer(tmp_path, capsys):
    vgg = random_vgg(0, fc=False)
    partial = WeightStore({k: v for k, v in vgg.items() if not k.startswith("conv5_3")})
    save(partial, tmp_path / "partial.ntw")
    code, _, err = run(capsys, "transplant", "--vgg", tmp_path / "partial.ntw", "--out", tmp_path / "o.ntw")
    assert code == 2 and "conv5_3" in err


def test_import_weights(tmp_path, capsys):
    store = random_vgg(0, MINI_BLOCKS)
    manifest = write_manifest(store, tmp_path)
    code, _, _ = run(capsys, "import-weights", "--manifest", manifest, "--out", tmp_path / "w.ntw")
    assert code == 0 and load(tmp_path / "w.ntw") == store
    (tmp_path / "t0.f32").write_bytes(b"\x00")
    assert run(capsys, "import-weights", "--manifest", manifest, "--out", tmp_path / "w.ntw")[0] == 2


def test_gradcheck_adjoint(capsys):
    code, out, _ = run(capsys, "gradcheck", "--instances", "3")
    assert code == 0
    assert "layer bilinear_resize" in out and "end-to-end" in out and "FAIL" not in out


def test_gradcheck_resize_mode_flags(capsys):
    code, out, _ = run(capsys, "gradcheck", "--mode", "paper-resize", "--instances", "2")
    assert code == 0
    assert "FLAG: above adjoint" in out


def test_inspect(tmp_path, capsys, mini_model):
    code, out, _ = run(capsys, "inspect", "--netspec", MINI, "--weights", mini_model)
    assert code == 0
    assert "saliency_map" in out and "1x1x6x8" in out and "10 entries" in out
    assert run(capsys, "inspect")[0] == 4


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "salicon", "gradcheck", "--seed", "x"],
                          capture_output=True, text=True)
    assert proc.returncode == 4
    assert "seed must be an integer" in proc.stderr
