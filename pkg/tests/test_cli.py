import pytest

from rboost.cli import EXIT_ALL_FAILED, EXIT_CONFIG, EXIT_OK, main

ARGS = ["run", "--data", "synthetic:150,2,2", "--noise", "symmetric:0.2", "--rounds", "3", "--reps", "2",
        "--learner", "lr", "--seed", "4"]


def test_run_to_file_is_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(ARGS + ["--out", str(a)]) == EXIT_OK
    assert main(ARGS + ["--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().startswith("dataset,noise_kind")


def test_markdown_stdout(capsys):
    assert main(ARGS + ["--format", "markdown"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("| dataset")


def test_curves_file(tmp_path):
    c = tmp_path / "c.csv"
    assert main(ARGS + ["--curves", "--curves-file", str(c)]) == EXIT_OK
    assert len(c.read_text().splitlines()) == 1 + 2 * 3


def test_csv_input(tmp_path, capsys):
    p = tmp_path / "d.csv"
    rows = [f"{i % 7},{(i * 3) % 5},{'yes' if i % 2 else 'no'}" for i in range(40)]
    p.write_text("\n".join(rows) + "\n")
    assert main(["run", "--data", str(p), "--positive-token", "yes", "--rounds", "2", "--reps", "1",
                 "--learner", "lr"]) == EXIT_OK
    assert capsys.readouterr().out.splitlines()[1].startswith("d,")


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "--data", "nope.csv"],
        ["run", "--data", "synthetic:1,2"],
        ["run", "--data", "synthetic:100,2,2", "--noise", "symmetric"],
        ["run", "--data", "synthetic:100,2,2", "--noise", "gaussian:0.1"],
        ["run", "--data", "synthetic:100,2,2", "--gamma", "fixed:2,2"],
        ["run", "--data", "synthetic:100,2,2", "--booster", "gentle"],
        ["fly"],
    ],
)
def test_config_errors(argv, capsys):
    assert main(argv) == EXIT_CONFIG


def test_all_reps_failed(monkeypatch):
    import rboost.bench as B

    monkeypatch.setattr(B, "run_rep", lambda *a: 1 / 0)
    assert main(ARGS) == EXIT_ALL_FAILED
