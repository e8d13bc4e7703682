import json
from pathlib import Path

import pytest

from grooving import cli

SMALL = str(Path(__file__).resolve().parents[1] / "configs" / "small.cfg")


def test_read_config_text():
    d = cli.read_config_text("# c\n a = 1 \n\nb=x # trailing\n")
    assert d == {"a": "1", "b": "x"}
    with pytest.raises(cli.ConfigError, match="twice"):
        cli.read_config_text("a = 1\na = 2\n")
    with pytest.raises(cli.ConfigError, match="key = value"):
        cli.read_config_text("just words\n")


def test_parse_defaults_and_kind_defaults():
    cfg = cli.parse_config("decay", overrides=["params.gamma=0.05"])
    assert cfg.values["initial.kind"] == "exp"
    assert cfg.values["grid.n_normal"] == 2049
    assert cfg.params.gamma == 0.05
    assert cli.parse_config("stability", overrides=["params.gamma=0.05"]).values["experiment.sigmas"] == (1.0, 4.0, 16.0)


@pytest.mark.parametrize(
    "kind,overrides,match",
    [
        ("solve", [], "params.gamma is required"),
        ("solve", ["params.gamma=0.05", "params.mu=1.5"], "mu"),
        ("solve", ["params.gamma=0.05", "grid.bogus=1"], "unknown configuration key"),
        ("solve", ["params.gamma=abc"], "cannot parse"),
        ("solve", ["params.gamma=0.05", "grid.dim=3"], "grid.dim"),
        ("solve", ["params.gamma=0.05", "time.t_max=0.0001"], "t_max"),
        ("solve", ["params.gamma=0.05", "time.t_max=3"], "ladder"),
        ("decay", ["params.gamma=0.05", "experiment.fit_lo=1", "experiment.fit_hi=16"], "100"),
        ("stability", ["params.gamma=0.05", "time.t_max=8"], "sigmas"),
        ("nonsense", [], "unknown experiment kind"),
    ],
)
def test_parse_errors(kind, overrides, match):
    with pytest.raises(cli.ConfigError, match=match):
        cli.parse_config(kind, overrides=overrides)


def test_gamma_optional_for_module_checks():
    assert cli.parse_config("lsp-sweep").values["params.gamma"] is None


def test_resolved_config_lists_every_key():
    cfg = cli.parse_config("solve", SMALL, ["run.seed=3"])
    lines = cfg.resolved_text().splitlines()
    assert lines[0] == "kind = solve"
    keys = [ln.split(" = ")[0] for ln in lines[1:]]
    assert keys == sorted(cli.KEYS)
    assert "run.seed = 3" in lines and "grid.n_normal = 513" in lines


@pytest.mark.parametrize(
    "argv",
    [
        ["solve", "--set", "params.mu=1.5", "--set", "params.gamma=0.05"],
        ["solve"],
        ["bogus"],
        ["solve", "--config", "/nonexistent.cfg"],
        ["solve", "--seed", "-1", "--set", "params.gamma=0.05"],
    ],
)
def test_usage_errors_exit_one(argv, tmp_path, capsys):
    assert cli.main(argv + ["--out", str(tmp_path)] if argv[0] != "bogus" else argv) == cli.EXIT_USAGE


def test_keys_listing(capsys):
    assert cli.main(["keys"]) == 0
    out = capsys.readouterr().out
    assert all(k in out for k in cli.KEYS)


def read_manifest(root: Path) -> dict:
    rows = (root / "manifest.tsv").read_text().splitlines()
    return dict(r.split("\t") for r in rows)


def test_lsp_run_writes_complete_manifest(tmp_path):
    code = cli.main(["lsp-sweep", "--out", str(tmp_path), "--set", "lsp.n_samples=100"])
    assert code == cli.EXIT_OK
    listed = set(read_manifest(tmp_path))
    on_disk = {str(p.relative_to(tmp_path)) for p in tmp_path.rglob("*") if p.is_file()} - {"manifest.tsv"}
    assert listed == on_disk
    res = json.loads((tmp_path / "result.json").read_text())
    assert res["kind"] == "lsp-sweep" and res["passed"]


def test_module_failure_writes_error_record(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise RuntimeError("synthetic failure")

    monkeypatch.setattr(cli.ex, "run_kernel_check", boom)
    assert cli.main(["kernel-check", "--out", str(tmp_path)]) == cli.EXIT_FAIL
    err = json.loads((tmp_path / "error.json").read_text())
    assert err == {"kind": "kernel-check", "error": "RuntimeError", "message": "synthetic failure"}
    assert not (tmp_path / "result.json").exists()
    assert "error.json" in read_manifest(tmp_path)


def test_interrupted_solve_resumes_to_same_result(tmp_path, monkeypatch):
    orig = cli._solve_hooks

    def interrupting(art, resume):
        save, state = orig(art, resume)

        def hook(it, w, rep):
            save(it, w, rep)
            if it == 2:
                raise KeyboardInterrupt

        return hook, state

    a, b = tmp_path / "a", tmp_path / "b"
    monkeypatch.setattr(cli, "_solve_hooks", interrupting)
    with pytest.raises(KeyboardInterrupt):
        cli.main(["solve", "--config", SMALL, "--out", str(a)])
    assert json.loads((a / "checkpoint" / "state.json").read_text())["iterations"] == 2
    monkeypatch.setattr(cli, "_solve_hooks", orig)
    assert cli.main(["solve", "--config", SMALL, "--out", str(a), "--resume"]) == cli.EXIT_OK
    assert cli.main(["solve", "--config", SMALL, "--out", str(b)]) == cli.EXIT_OK
    ra, rb = (json.loads((d / "result.json").read_text()) for d in (a, b))
    assert ra["notes"]["trajectory_sha256"] == rb["notes"]["trajectory_sha256"]
    assert read_manifest(a) == read_manifest(b)
