import numpy as np
import pytest

from spdflow.cli import flow_config_from_manifest, main, manifest_path, read_manifest
from spdflow.fieldio import read_field, write_field
from spdflow.flows import run_flow
from spdflow.geometry import vech
from spdflow.immersion import TensorField


@pytest.fixture
def pipeline(tmp_path):
    """Paths of a generated truth and its noisy copy on a 16 x 16 grid."""
    truth, noisy = tmp_path / "truth.spdf", tmp_path / "noisy.spdf"
    assert main(["generate", "--pattern", "two_region", "--dims", "16x16", "--out", str(truth)]) == 0
    assert main(["noise", "--in", str(truth), "--out", str(noisy), "--sigma", "0.3", "--seed", "7"]) == 0
    return truth, noisy


class TestGenerate:
    def test_payload_size(self, tmp_path, capsys):
        out = tmp_path / "a.spdf"
        assert main(["generate", "--pattern", "two_region", "--dims", "32x32", "--out", str(out)]) == 0
        raw = out.read_bytes()
        assert len(raw.partition(b"end\n")[2]) == 32 * 32 * 6 * 8
        assert "two_region" in capsys.readouterr().out
        m = read_manifest(manifest_path(out))
        assert m["spec.pattern"] == "two_region"
        assert m["command"] == "generate"

    def test_missing_out(self, capsys):
        assert main(["generate", "--pattern", "two_region", "--dims", "8x8"]) == 2

    def test_non_spd_tensor(self, tmp_path, capsys):
        code = main(["generate", "--pattern", "constant", "--dims", "8x8", "--tensor", "1,-1,1",
                     "--out", str(tmp_path / "a.spdf")])
        assert code == 2
        assert "not positive definite" in capsys.readouterr().err

    @pytest.mark.parametrize("dims", ["8y8", "2x8", "8"])
    def test_bad_dims(self, tmp_path, dims):
        assert main(["generate", "--pattern", "constant", "--dims", dims, "--out", str(tmp_path / "a")]) == 2

    def test_unwritable(self, tmp_path):
        out = tmp_path / "missing" / "a.spdf"
        assert main(["generate", "--pattern", "constant", "--dims", "8x8", "--out", str(out)]) == 1


class TestNoise:
    def test_sigma_zero(self, tmp_path, pipeline):
        truth, _ = pipeline
        out = tmp_path / "z.spdf"
        assert main(["noise", "--in", str(truth), "--out", str(out), "--sigma", "0"]) == 0
        assert out.read_bytes() == truth.read_bytes()

    def test_same_seed(self, tmp_path, pipeline):
        truth, noisy = pipeline
        again = tmp_path / "again.spdf"
        main(["noise", "--in", str(truth), "--out", str(again), "--sigma", "0.3", "--seed", "7"])
        assert again.read_bytes() == noisy.read_bytes()

    def test_unreadable(self, tmp_path):
        assert main(["noise", "--in", str(tmp_path / "nope.spdf"), "--out", str(tmp_path / "o")]) == 1

    def test_manifest_inherits_spec(self, pipeline):
        m = read_manifest(manifest_path(pipeline[1]))
        assert m["noise.seed"] == "7"
        assert m["input.spec.pattern"] == "two_region"


class TestFlow:
    def test_zero_steps(self, tmp_path, pipeline):
        _, noisy = pipeline
        out = tmp_path / "o.spdf"
        assert main(["flow", "--in", str(noisy), "--out", str(out), "--kind", "tv", "--steps", "0"]) == 0
        assert read_field(out).data.tobytes() == read_field(noisy).data.tobytes()

    def test_limit_consistency(self, tmp_path, pipeline):
        _, noisy = pipeline
        a, b = tmp_path / "a.spdf", tmp_path / "b.spdf"
        assert main(["flow", "--in", str(noisy), "--out", str(a), "--kind", "self_snakes", "--k", "1e12",
                     "--steps", "5"]) == 0
        assert main(["flow", "--in", str(noisy), "--out", str(b), "--kind", "rmc", "--steps", "5"]) == 0
        assert np.abs(read_field(a).data - read_field(b).data).max() < 1e-8

    def test_default_run_manifest(self, tmp_path, pipeline, capsys):
        _, noisy = pipeline
        out = tmp_path / "o.spdf"
        assert main(["flow", "--in", str(noisy), "--out", str(out), "--kind", "tv", "--verbose"]) == 0
        printed = capsys.readouterr().out
        assert printed.count("energy=") == 50
        m = read_manifest(manifest_path(out))
        assert m["config.steps"] == "50" and m["steps_executed"] == "50"
        assert m["config.dt"] == "0.01" and m["config.safeguard"] == "clamp"
        assert len(m["energy_per_step"].split(",")) == 50
        assert m["input.noise.seed"] == "7"
        assert m["input.input.spec.pattern"] == "two_region"

    def test_replay_from_manifest(self, tmp_path, pipeline):
        _, noisy = pipeline
        out = tmp_path / "o.spdf"
        assert main(["flow", "--in", str(noisy), "--out", str(out), "--kind", "self_snakes", "--steps", "7",
                     "--sigma", "0.7"]) == 0
        m = read_manifest(manifest_path(out))
        replay, _ = run_flow(read_field(m["input.path"]), flow_config_from_manifest(m))
        assert replay.data.tobytes() == read_field(out).data.tobytes()
        assert float(m["k_used"]) > 0

    def test_strict_exit_3(self, tmp_path, pipeline, capsys):
        _, noisy = pipeline
        code = main(["flow", "--in", str(noisy), "--out", str(tmp_path / "o"), "--kind", "tv",
                     "--dt", "5", "--steps", "2", "--safeguard", "strict"])
        assert code == 3
        assert "step 0" in capsys.readouterr().err
        assert not (tmp_path / "o").exists()

    @pytest.mark.parametrize("flags", [["--kind", "heat"], ["--kind", "tv", "--dt", "-1"],
                                       ["--kind", "tv", "--k", "0"], ["--kind", "tv", "--safeguard", "off"]])
    def test_config_errors(self, tmp_path, pipeline, flags):
        _, noisy = pipeline
        assert main(["flow", "--in", str(noisy), "--out", str(tmp_path / "o")] + flags) == 2


class TestMetrics:
    def test_self(self, pipeline, capsys):
        truth, _ = pipeline
        assert main(["metrics", str(truth), str(truth)]) == 0
        out = capsys.readouterr().out
        assert "riemannian_mse=0.0" in out
        assert "spd_violation_count=0" in out

    def test_denoising_improves(self, tmp_path, pipeline, capsys):
        truth, noisy = pipeline
        den = tmp_path / "d.spdf"
        main(["flow", "--in", str(noisy), "--out", str(den), "--kind", "tv"])
        capsys.readouterr()

        def mse(path):
            main(["metrics", str(path), str(truth)])
            line = capsys.readouterr().out.splitlines()[0]
            return float(line.split("=")[1])

        assert mse(den) < mse(noisy)

    def test_missing(self, tmp_path, pipeline):
        assert main(["metrics", str(tmp_path / "nope"), str(pipeline[0])]) == 1

    def test_dims_mismatch(self, tmp_path, pipeline):
        other = tmp_path / "small.spdf"
        main(["generate", "--pattern", "constant", "--dims", "8x8", "--out", str(other)])
        assert main(["metrics", str(other), str(pipeline[0])]) == 2


class TestGlyphs:
    def test_identity_field(self, tmp_path):
        src, out = tmp_path / "i.spdf", tmp_path / "g.csv"
        write_field(TensorField(np.broadcast_to(vech(np.eye(3)), (4, 5, 6)).copy()), src)
        assert main(["glyphs", str(src), "--out", str(out)]) == 0
        rows = out.read_text().splitlines()
        assert len(rows) == 21
        assert all(r.split(",")[3:6] == ["1", "1", "1"] for r in rows[1:])

    def test_deterministic(self, tmp_path, pipeline):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["glyphs", str(pipeline[1]), "--out", str(a)])
        main(["glyphs", str(pipeline[1]), "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()
        assert len(a.read_text().splitlines()) == 16 * 16 + 1


def test_no_command():
    assert main([]) == 2


def test_help(capsys):
    assert main(["--help"]) == 0
    assert "generate" in capsys.readouterr().out
