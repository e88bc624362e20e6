"""End-to-end command runs through the CLI entry point."""

import os

import pytest

from src.cli import build_parser, main
from src.errors import EXIT_ACCEPTANCE, EXIT_CONFIG, EXIT_OK
from src.storage import read_csv_timeseries


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    for name in list(os.environ):
        if name.startswith("SWE_FEMLAB_"):
            monkeypatch.delenv(name)


def _two_squares(path):
    nodes = [(0, 0), (1, 0), (1, 1), (0, 1), (3, 0), (4, 0), (4, 1), (3, 1)]
    elements = []
    for off in (0, 4):
        elements += [f"1 2 0 1 {off + 1} {off + 2}", f"1 2 0 1 {off + 2} {off + 3}",
                     f"1 2 0 1 {off + 3} {off + 4}", f"1 2 0 1 {off + 4} {off + 1}",
                     f"2 2 0 1 {off + 1} {off + 2} {off + 3}", f"2 2 0 1 {off + 1} {off + 3} {off + 4}"]
    lines = ["$MeshFormat", "2.2 0 8", "$EndMeshFormat", "$Nodes", str(len(nodes))]
    lines += [f"{i + 1} {x} {y} 0" for i, (x, y) in enumerate(nodes)]
    lines += ["$EndNodes", "$Elements", str(len(elements))]
    lines += [f"{i + 1} {e}" for i, e in enumerate(elements)]
    lines.append("$EndElements")
    path.write_text("\n".join(lines) + "\n")
    return path


def test_parser_has_every_experiment():
    parser = build_parser()
    args = parser.parse_args(["steady", "--ro", "inf", "--no-zero-boundary", "--threads", "2"])
    assert args.command == "steady"
    assert args.ro == "inf"
    assert args.zero_boundary is False
    assert args.threads == "2"
    assert args.dt is None


def test_usage_errors_are_config_errors(capsys):
    assert main(["steady", "--bogus", "1"]) == EXIT_CONFIG
    assert "--bogus" in capsys.readouterr().err
    assert main([]) == EXIT_CONFIG
    assert main(["tsunami"]) == EXIT_CONFIG


def test_help_exits_cleanly(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["steady", "--help"])
    assert exc.value.code == 0
    assert "--edge-length" in capsys.readouterr().out


def test_spectrum_command(tmp_path, capsys):
    code = main(["spectrum", "--edge-length", "0.25", "--output-dir", str(tmp_path)])
    assert code == EXIT_OK
    rows = read_csv_timeseries(tmp_path / "spectrum.csv")
    assert sum(r["near_zero"] for r in rows) == 1
    assert (tmp_path / "K.mtx").exists()
    assert (tmp_path / "Mh.mtx").exists()
    summary = read_csv_timeseries(tmp_path / "spectrum_summary.csv")[0]
    assert summary["laplacian_equivalence"] < 1e-10
    assert "SPECTRUM OK" in capsys.readouterr().out


def test_spectrum_disjoint_mesh_fails(tmp_path):
    mesh_file = _two_squares(tmp_path / "two.msh")
    code = main(["spectrum", "--domain", "file", "--mesh-file", str(mesh_file),
                 "--distortion", "0", "--output-dir", str(tmp_path / "out")])
    assert code == EXIT_ACCEPTANCE
    # Evidence is still written
    assert (tmp_path / "out" / "spectrum.csv").exists()


def test_balance_command(tmp_path):
    code = main(["balance", "--edge-length", "0.25", "--output-dir", str(tmp_path)])
    assert code == EXIT_OK
    row = read_csv_timeseries(tmp_path / "balance.csv")[0]
    assert row["divergence_norm"] < 1e-12
    assert row["divergence_norm_boundary_zeroed"] < 1e-12
    # Centred Gaussian is nearly constant on the coast: both are round-off
    assert row["divergence_norm_untruncated"] < 1e-12
    for name in ("balance.vtk", "balance_dg.vtk", "balance_streamlines.png"):
        assert (tmp_path / name).exists()


def test_balance_off_centre_needs_truncation(tmp_path):
    code = main(["balance", "--edge-length", "0.25", "--gaussian-x", "0.5",
                 "--output-dir", str(tmp_path)])
    assert code == EXIT_OK
    row = read_csv_timeseries(tmp_path / "balance.csv")[0]
    assert row["divergence_norm_untruncated"] > 1e-6
    assert row["divergence_norm_boundary_zeroed"] < 1e-12
    assert row["divergence_norm"] == row["divergence_norm_boundary_zeroed"]


def test_steady_command(tmp_path):
    code = main(["steady", "--edge-length", "0.25", "--t-end", "0.1", "--dt", "0.01",
                 "--n-fields", "2", "--seed", "7", "--output-dir", str(tmp_path)])
    assert code == EXIT_OK
    rows = read_csv_timeseries(tmp_path / "steady_timeseries.csv")
    assert len(rows) == 2 * 11
    assert max(r["u_drift"] for r in rows) < 1e-10
    assert max(r["energy_drift"] for r in rows) < 1e-10


def test_steady_unbalanced_fails(tmp_path):
    code = main(["steady", "--edge-length", "0.25", "--t-end", "0.1", "--dt", "0.01",
                 "--unbalanced", "--output-dir", str(tmp_path)])
    assert code == EXIT_ACCEPTANCE
    assert (tmp_path / "steady_timeseries.csv").exists()


def test_kelvin_circular_short_run(tmp_path):
    code = main(["kelvin-circular", "--edge-length", "0.2", "--ro", "0.5", "--dt", "0.05",
                 "--t-end", "0.5", "--snapshot-times", "0,0.25,0.5", "--retention-band", "0.5",
                 "--output-dir", str(tmp_path)])
    assert code == EXIT_OK
    index = read_csv_timeseries(tmp_path / "kelvin_circular_snapshots.csv")
    assert [r["t"] for r in index] == pytest.approx([0.0, 0.25, 0.5])
    assert (tmp_path / "kelvin_circular_00002_dg.vtk").exists()
    assert (tmp_path / "kelvin_circular.png").exists()


def test_bad_distortion_is_config_error(tmp_path, capsys):
    code = main(["balance", "--distortion", "0.5", "--output-dir", str(tmp_path)])
    assert code == EXIT_CONFIG
    assert "distortion" in capsys.readouterr().err


def test_config_file_flag(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"edge_length = 0.25\noutput_dir = {tmp_path / 'from_file'}\n")
    assert main(["spectrum", "--config", str(cfg)]) == EXIT_OK
    assert (tmp_path / "from_file" / "spectrum.csv").exists()


@pytest.mark.slow
def test_kelvin_converge_slopes(tmp_path):
    code = main(["kelvin-converge", "--output-dir", str(tmp_path)])
    assert code == EXIT_OK
    for row in read_csv_timeseries(tmp_path / "convergence_slopes.csv"):
        assert 1.8 <= row["slope"] <= 2.4


@pytest.mark.slow
def test_kelvin_converge_asymptotic_ladder(tmp_path):
    # Narrow channel around the wave path; every level divides both sides
    code = main(["kelvin-converge", "--x-min", "-9", "--x-max", "9", "--y-max", "1.2",
                 "--edge-lengths", "0.2,0.15,0.1,0.075", "--slope-min", "1.85",
                 "--output-dir", str(tmp_path)])
    assert code == EXIT_OK
    slopes = {r["column"]: r["slope"] for r in read_csv_timeseries(tmp_path / "convergence_slopes.csv")}
    assert 1.85 <= slopes["velocity"] <= 2.5
    assert 1.85 <= slopes["thickness"] <= 2.5


@pytest.mark.slow
def test_kelvin_converge_threads_match_sequential(tmp_path):
    args = ["kelvin-converge", "--edge-lengths", "0.4,0.3,0.2", "--t-end", "2", "--slope-min", "0"]
    assert main(args + ["--output-dir", str(tmp_path / "seq")]) == EXIT_OK
    assert main(args + ["--threads", "3", "--no-deterministic",
                        "--output-dir", str(tmp_path / "par")]) == EXIT_OK
    seq = (tmp_path / "seq" / "convergence.csv").read_bytes()
    par = (tmp_path / "par" / "convergence.csv").read_bytes()
    assert seq == par


@pytest.mark.slow
def test_kelvin_circular_full_run(tmp_path):
    assert main(["kelvin-circular", "--output-dir", str(tmp_path)]) == EXIT_OK
    index = read_csv_timeseries(tmp_path / "kelvin_circular_snapshots.csv")
    assert [r["t"] for r in index] == pytest.approx([0.0, 30.0, 60.0, 90.0])
