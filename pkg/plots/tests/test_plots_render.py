"""CLI rendering: all kinds produce images, bad input fails cleanly."""

import pytest
from click.testing import CliRunner

from thimbleplots.cli import main


@pytest.fixture()
def runner():
    return CliRunner()


def test_render_heatmap(runner, artifact, tmp_path):
    out = tmp_path / "heatmap.png"
    res = runner.invoke(main, ["render", "heatmap", artifact("growthmap.csv"),
                               "-o", str(out)])
    assert res.exit_code == 0, res.output
    assert out.stat().st_size > 1000


def test_render_bundle3d(runner, artifact, tmp_path):
    out = tmp_path / "bundle.png"
    res = runner.invoke(main, ["render", "bundle3d", artifact("flows_2d.csv"),
                               "--sigma", "0", "-o", str(out)])
    assert res.exit_code == 0, res.output
    assert out.stat().st_size > 1000


def test_render_sections3d(runner, artifact, tmp_path):
    out = tmp_path / "sections.png"
    res = runner.invoke(main, ["render", "sections3d",
                               artifact("sections_3d.csv"),
                               artifact("triangles_3d.csv"), "-o", str(out)])
    assert res.exit_code == 0, res.output
    assert out.stat().st_size > 1000


def test_render_rejects_bad_schema(runner, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    res = runner.invoke(main, ["render", "heatmap", str(bad),
                               "-o", str(tmp_path / "x.png")])
    assert res.exit_code == 1
    assert "error:" in res.output


def test_render_rejects_missing_sigma(runner, artifact, tmp_path):
    res = runner.invoke(main, ["render", "bundle3d", artifact("flows_2d.csv"),
                               "--sigma", "7", "-o", str(tmp_path / "x.png")])
    assert res.exit_code == 1


def test_render_deterministic(runner, artifact, tmp_path):
    outs = []
    for name in ("a.png", "b.png"):
        out = tmp_path / name
        res = runner.invoke(main, ["render", "heatmap",
                                   artifact("growthmap.csv"), "-o", str(out)])
        assert res.exit_code == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
