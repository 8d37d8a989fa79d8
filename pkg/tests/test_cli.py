import numpy as np
import pytest

from initik.cli import (
    EXIT_CHECK,
    EXIT_CONFIG,
    EXIT_OK,
    ConfigError,
    load_config,
    main,
)

DENSE_CONFIG = """
[problem]
kind = dense
rows = 12
cols = 10
decay = 0.65
noise_level = 0.05
noise_kind = gaussian
seed = 3

[solver:it]
method = it
tau = 1.5
lambda = constant 1.0
inner_tol = 1e-10
max_outer = 400
x0 = 0.0

[solver:init0]
method = init
tau = 1.5
alpha_bar = 0.0
lambda = constant 1.0
inner_tol = 1e-10
max_outer = 400
x0 = 0.0

[output]
directory = {out}
diagnostics = residual_monotonicity, inertia_summability, kstar_bound
"""


@pytest.fixture
def dense_config(tmp_path):
    out = tmp_path / "out"
    path = tmp_path / "dense.cfg"
    path.write_text(DENSE_CONFIG.format(out=out))
    return path, out


class TestConfigParsing:
    def test_invalid_tau_names_constraint(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text(
            "[problem]\nkind = dense\n\n"
            "[solver:a]\nmethod = it\ntau = 0.5\n"
        )
        with pytest.raises(ConfigError, match="tau must be > 1"):
            load_config(path)

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text(
            "[problem]\nkind = dense\nbogus = 1\n\n[solver:a]\nmethod = it\n"
        )
        with pytest.raises(ConfigError, match="bogus"):
            load_config(path)

    def test_unknown_section_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text(
            "[problem]\nkind = dense\n\n[solver:a]\nmethod = it\n\n[extra]\nx = 1\n"
        )
        with pytest.raises(ConfigError, match="extra"):
            load_config(path)

    def test_missing_problem_section(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("[solver:a]\nmethod = it\n")
        with pytest.raises(ConfigError, match="problem"):
            load_config(path)

    def test_unknown_method(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("[problem]\nkind = dense\n\n[solver:a]\nmethod = sirt\n")
        with pytest.raises(ConfigError, match="method"):
            load_config(path)

    def test_missing_file_exit_code(self, capsys):
        assert main(["run", "/nonexistent/path.cfg"]) == EXIT_CONFIG
        assert "config error" in capsys.readouterr().err

    def test_bundled_configs_resolve_by_name(self):
        for name in ("ipp_0p1", "ipp_5p0", "ipp_const_alpha",
                     "idp_0p1", "idp_1p0", "explicit_compare"):
            config = load_config(name)
            assert config.solvers

    def test_usage_error_exit_code(self):
        assert main(["frobnicate"]) == EXIT_CONFIG


class TestRun:
    def test_run_writes_outputs_and_passes_checks(self, dense_config, capsys):
        path, out = dense_config
        assert main(["run", str(path)]) == EXIT_OK
        assert (out / "it.csv").is_file()
        assert (out / "init0.csv").is_file()
        assert (out / "summary.txt").is_file()
        assert (out / "checks.jsonl").is_file()
        stdout = capsys.readouterr().out
        assert "k_star=" in stdout

    def test_byte_identical_reruns(self, dense_config):
        path, out = dense_config
        assert main(["run", str(path)]) == EXIT_OK
        first = (out / "it.csv").read_bytes()
        assert main(["run", str(path)]) == EXIT_OK
        assert (out / "it.csv").read_bytes() == first

    def test_csv_discrepancy_semantics(self, dense_config):
        path, out = dense_config
        assert main(["run", str(path)]) == EXIT_OK
        lines = (out / "it.csv").read_text().strip().split("\n")
        assert lines[0] == "k,rel_error,rel_residual,alpha_k,lambda_k,inner_iters"
        rows = [line.split(",") for line in lines[1:]]
        from initik import make_dense_problem

        problem = make_dense_problem(rows=12, cols=10, decay=0.65,
                                     noise_level=0.05, seed=3)
        threshold = 1.5 * problem.delta / np.linalg.norm(problem.noisy_data)
        rel_res = [float(r[2]) for r in rows]
        assert rel_res[-1] <= threshold
        assert rel_res[-2] > threshold

    def test_alpha_zero_matches_plain_iterated_tikhonov(self, dense_config):
        path, out = dense_config
        assert main(["run", str(path)]) == EXIT_OK
        it_rows = (out / "it.csv").read_text().strip().split("\n")[1:]
        ini_rows = (out / "init0.csv").read_text().strip().split("\n")[1:]
        assert len(it_rows) == len(ini_rows)
        for a, b in zip(it_rows, ini_rows):
            fa, fb = a.split(","), b.split(",")
            assert fa[0] == fb[0] and fa[5] == fb[5]
            assert abs(float(fa[1]) - float(fb[1])) <= 1e-10

    def test_max_outer_zero_override(self, dense_config, capsys):
        path, out = dense_config
        assert main(["run", str(path), "--max-outer", "0"]) == EXIT_OK
        lines = (out / "it.csv").read_text().strip().split("\n")
        assert len(lines) == 2  # header and the start row only
        assert "stop=max_outer" in capsys.readouterr().out

    def test_seed_override_changes_noise(self, dense_config):
        path, out = dense_config
        assert main(["run", str(path)]) == EXIT_OK
        base = (out / "it.csv").read_bytes()
        assert main(["run", str(path), "--seed", "99"]) == EXIT_OK
        assert (out / "it.csv").read_bytes() != base

    def test_out_dir_flag_and_env(self, dense_config, tmp_path, monkeypatch):
        path, _ = dense_config
        flag_dir = tmp_path / "flagdir"
        assert main(["run", str(path), "--out-dir", str(flag_dir)]) == EXIT_OK
        assert (flag_dir / "it.csv").is_file()
        env_dir = tmp_path / "envdir"
        monkeypatch.setenv("INITIK_OUT_DIR", str(env_dir))
        assert main(["run", str(path)]) == EXIT_OK
        assert (env_dir / "it.csv").is_file()

    def test_bundled_ipp_run(self, tmp_path):
        out = tmp_path / "bundled"
        assert main(["run", "ipp_0p1", "--out-dir", str(out)]) == EXIT_OK
        assert (out / "init.csv").is_file()

    def test_user_supplied_image(self, tmp_path):
        pgm = tmp_path / "tiny.pgm"
        rng = np.random.default_rng(0)
        raster = bytes(rng.integers(0, 256, 16 * 16).tolist())
        pgm.write_bytes(b"P5\n16 16\n255\n" + raster)
        config = tmp_path / "image.cfg"
        config.write_text(
            "[problem]\nkind = deblurring\n"
            f"image = {pgm}\n"
            "psf_size = 5\npsf_sigma = 1.0\nnoise_level = 0.01\nseed = 1\n\n"
            "[solver:it]\nmethod = it\ntau = 1.5\nlambda = geometric 1.5\n"
            "max_outer = 40\nx0 = 0.0\n"
        )
        out = tmp_path / "imgout"
        assert main(["run", str(config), "--out-dir", str(out)]) == EXIT_OK
        assert (out / "it.csv").is_file()

    def test_ipp_phantom_descriptor(self, tmp_path):
        config = tmp_path / "phantom.cfg"
        config.write_text(
            "[problem]\nkind = ipp\ncells = 4\ngrid = 16\n"
            "background = 0.5\ninclusion = 3.0\n"
            "inclusion_rect = 0.5,1.0,0.0,0.5\nnoise_level = 0.01\nseed = 2\n\n"
            "[solver:it]\nmethod = it\ntau = 1.5\nlambda = constant 1.0\n"
            "max_outer = 50\nx0 = 0.5\n"
        )
        out = tmp_path / "phout"
        assert main(["run", str(config), "--out-dir", str(out)]) == EXIT_OK
        from initik import default_ipp_phantom

        phantom = default_ipp_phantom(4, background=0.5, inclusion=3.0,
                                      rect=(0.5, 1.0, 0.0, 0.5))
        assert set(np.unique(phantom)) == {0.5, 3.0}


class TestCompare:
    def test_requires_two_methods(self, tmp_path, capsys):
        path = tmp_path / "single.cfg"
        path.write_text(
            "[problem]\nkind = dense\n\n[solver:a]\nmethod = it\ntau = 1.5\n"
        )
        assert main(["compare", str(path)]) == EXIT_CONFIG
        assert "at least 2" in capsys.readouterr().err

    def test_reduction_pair_identical_work(self, dense_config, capsys):
        path, out = dense_config
        assert main(["compare", str(path)]) == EXIT_OK
        table = (out / "compare.csv").read_text().strip().split("\n")
        rows = [line.split(",") for line in table[1:]]
        assert rows[0][2] == rows[1][2]  # same k*
        assert rows[0][4] == rows[1][4]  # same inner totals
        assert all(float(r[6]) == 0.0 for r in rows)

    def test_shared_noise_realization(self, dense_config, capsys):
        path, out = dense_config
        assert main(["compare", str(path)]) == EXIT_OK
        table = (out / "compare.csv").read_text().strip().split("\n")
        errs = [float(line.split(",")[5]) for line in table[1:]]
        assert errs[0] == pytest.approx(errs[1], abs=1e-10)


class TestSelftest:
    def test_all_checks_pass(self, capsys):
        assert main(["selftest"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "FAIL" not in out
        assert out.count("PASS") >= 7

    def test_deterministic_output(self, capsys):
        main(["selftest"])
        first = capsys.readouterr().out
        main(["selftest"])
        assert capsys.readouterr().out == first

    def test_fault_injection_fails_with_index(self, capsys):
        assert main(["selftest", "--inject-fault"]) == EXIT_CHECK
        out = capsys.readouterr().out
        assert "FAIL residual_monotonicity" in out
        assert "worst at step" in out
