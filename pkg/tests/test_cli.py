import json
import math

import numpy as np
import pytest

from sectorcalc import cli, fileio
from sectorcalc.errors import UsageError
from sectorcalc.parabolic import GridFunction


@pytest.fixture
def files(tmp_path):
    fileio.write_matrix(tmp_path / "a.mat", np.diag([1.0, 2.0]))
    fileio.write_matrix(tmp_path / "b.mat", np.diag([3.0, 1.0]))
    fileio.write_vector(tmp_path / "y.vec", np.array([1.0, 1.0]))
    fileio.write_matrix(tmp_path / "four.mat", np.diag([4.0]))
    fileio.write_matrix(tmp_path / "neg.mat", np.diag([-1.0]))
    fileio.write_grid(tmp_path / "g.grid", GridFunction.constant([1.0], math.pi, 100))
    (tmp_path / "empty.mat").write_text("")
    return tmp_path


def sum_args(d):
    return ["sum-solve", "--matrix-a", str(d / "a.mat"), "--matrix-b", str(d / "b.mat"),
            "--rhs", str(d / "y.vec"), "--theta-a", "2.0", "--theta-b", "1.5"]


def test_parse_sum_solve(files):
    cfg = cli.parse_config(sum_args(files))
    assert cfg.command == "sum-solve"
    assert cfg.theta_a == 2.0 and cfg.theta_b == 1.5
    assert cfg.phi == 0.5


def test_missing_flag_named(files):
    args = sum_args(files)
    i = args.index("--matrix-a")
    del args[i:i + 2]
    with pytest.raises(UsageError) as info:
        cli.parse_config(args)
    assert info.value.flag == "--matrix-a"


def test_angle_range(files):
    args = sum_args(files)
    args[args.index("--theta-a") + 1] = "4.0"
    with pytest.raises(UsageError) as info:
        cli.parse_config(args)
    assert info.value.flag == "--theta-a"


def test_inapplicable_and_unknown(files, tmp_path):
    with pytest.raises(UsageError):
        cli.parse_config(sum_args(files) + ["--w", "1"])
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"command": "verify", "suite": "dpg", "colour": 1}))
    with pytest.raises(UsageError):
        cli.parse_config(["--config", str(cfg_path)])
    assert cli.main(["--config", str(cfg_path)]) == 2


def test_config_file_under_flags(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"command": "verify", "suite": "dpg", "seed": 3}))
    cfg = cli.parse_config(["--config", str(cfg_path), "--seed", "7"])
    assert cfg.suite == "dpg" and cfg.seed == 7


def test_verify_dpg(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["verify", "--suite", "dpg", "--seed", "7", "--out", str(out)]) == 0
    lines = (out / "verify.csv").read_text().splitlines()
    assert lines[0] == "suite,check,value,threshold,pass"
    assert len(lines) > 1 and all(line.startswith("dpg,") for line in lines[1:])
    assert "status=pass" in (out / "verify.report").read_text()


def test_empty_matrix_usage_error(files):
    out = files / "out"
    code = cli.main(["certify-sector", "--matrix", str(files / "empty.mat"), "--theta", "1.0", "--out", str(out)])
    assert code == 2


def test_missing_file_usage_error(files):
    code = cli.main(["certify-sector", "--matrix", str(files / "nope.mat"), "--theta", "1.0", "--out", str(files)])
    assert code == 2


def test_uncertified_hyperbolic(files):
    out = files / "out"
    code = cli.main(["hyperbolic", "--matrix", str(files / "neg.mat"), "--g", str(files / "g.grid"),
                     "--c", "1.0", "--out", str(out)])
    assert code == 1
    text = (out / "hyperbolic.report").read_text()
    assert "error=RegionViolation" in text
    assert "status=fail" in text


def test_hyperbolic_run(files):
    out = files / "out"
    code = cli.main(["hyperbolic", "--matrix", str(files / "four.mat"), "--g", str(files / "g.grid"),
                     "--c", "2.0", "--verify-identities", "--out", str(out)])
    assert code == 0
    f = fileio.read_grid(out / "hyperbolic.grid")
    np.testing.assert_allclose(f.values[:, 0], (1 - np.cos(2 * f.times)) / 4, atol=1e-3)
    assert (out / "hyperbolic.identities.csv").is_file()


@pytest.mark.parametrize(
    "args, product",
    [
        (["certify-sector", "--matrix", "a.mat", "--theta", "1.0"], "certify-sector.report"),
        (["certify-q", "--matrix", "four.mat", "--c", "4.0"], "certify-q.report"),
        (["frac-power", "--matrix", "a.mat", "--theta", "0.5"], "frac-power.mat"),
        (["semigroup", "--matrix", "a.mat", "--w", "1.0"], "semigroup.mat"),
        (["parabolic", "--matrix", "four.mat", "--g", "g.grid", "--theta", "2.3"], "parabolic.grid"),
    ],
)
def test_commands_deterministic(files, args, product):
    args = [str(files / a) if a.endswith((".mat", ".grid", ".vec")) else a for a in args]
    outputs = []
    for k in range(2):
        out = files / f"run{k}"
        assert cli.main(args + ["--out", str(out)]) == 0
        outputs.append(((out / f"{args[0]}.report").read_bytes(), (out / product).read_bytes()))
    assert outputs[0] == outputs[1]


def test_sum_solve_output(files):
    out = files / "out"
    assert cli.main(sum_args(files) + ["--out", str(out)]) == 0
    x = fileio.read_vector(out / "sum-solve.vec")
    np.testing.assert_allclose(x, [1 / 4, 1 / 3], atol=1e-8)


def test_frac_power_output(files):
    out = files / "out"
    assert cli.main(["frac-power", "--matrix", str(files / "a.mat"), "--theta", "0.5", "--out", str(out)]) == 0
    M = fileio.read_matrix(out / "frac-power.mat")
    np.testing.assert_allclose(M, np.diag([1.0, 2 ** -0.5]), atol=1e-8)
