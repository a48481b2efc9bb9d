import math
import shutil
from pathlib import Path

import pytest

from hypersinh_plots import FigureSpec, SchemaMismatch, render
from hypersinh_plots.figures import describe

SAMPLES = Path(__file__).resolve().parents[1] / "sample_data"


def spec_for(kind, tmp_path):
    if kind == "scaling":
        return FigureSpec(kind, {"csv": SAMPLES / "gmc_moments.csv",
                                 "summary": SAMPLES / "gmc_moments_summary.json"},
                          str(tmp_path / "scaling.png"), reference=3.5)
    if kind == "covariance":
        return FigureSpec(kind, {"csv": SAMPLES / "covariance.csv",
                                 "summary": SAMPLES / "covariance_summary.json"},
                          str(tmp_path / "cov.png"), reference=-1 / (2 * math.pi))
    if kind == "invariance-hist":
        return FigureSpec(kind, {"csv": SAMPLES / "invariance_samples.csv",
                                 "summary": SAMPLES / "invariance.json"},
                          str(tmp_path / "inv.png"))
    return FigureSpec(kind, {"summary": SAMPLES / "kernel_check.json"},
                      str(tmp_path / "ker.png"))


@pytest.mark.parametrize("kind", ["scaling", "covariance", "invariance-hist", "kernel-trend"])
def test_every_kind_renders(tmp_path, kind):
    spec = spec_for(kind, tmp_path)
    out = render(spec)
    assert Path(out).exists()
    assert Path(out).stat().st_size > 5_000


def test_scaling_structure_golden(tmp_path):
    info = describe(spec_for("scaling", tmp_path))
    ax = info["axes"][0]
    assert ax["xlabel"] == "r"
    assert ax["ylabel"] == "moment estimate"
    assert any("reference 3.5" in t for t in ax["annotations"])
    assert any(t.startswith("fitted exponent = ") for t in ax["annotations"])
    assert any("reference slope 3.5" in t for t in ax["legend"])


def test_covariance_structure_golden(tmp_path):
    info = describe(spec_for("covariance", tmp_path))
    ax = info["axes"][0]
    assert ax["xlabel"] == "log(|x| + 1/N)"
    assert any("-0.1592" in t for t in ax["annotations"])  # -1/(2 pi) reference
    assert any("slope -0.1592 guide" in t for t in ax["legend"])


def test_invariance_structure_golden(tmp_path):
    info = describe(spec_for("invariance-hist", tmp_path))
    titles = [ax["title"] for ax in info["axes"] if ax["title"]]
    assert any("proj_mass" in t for t in titles)
    assert any("ks p=" in t for t in titles)
    legends = [t for ax in info["axes"] for t in ax["legend"]]
    assert "fresh" in legends and "evolved" in legends


def test_kernel_trend_structure_golden(tmp_path):
    info = describe(spec_for("kernel-trend", tmp_path))
    ax = info["axes"][0]
    assert ax["xlabel"] == "mollification parameter"
    labels = " ".join(ax["legend"])
    for name in ("time_smoothing", "space_smoothing", "frac_derivative"):
        assert name in labels


def test_deterministic_structure(tmp_path):
    a = describe(spec_for("scaling", tmp_path))
    b = describe(spec_for("scaling", tmp_path))
    assert a == b


def test_missing_column_fails_loudly(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("foo,bar\n1,2\n")
    spec = FigureSpec("scaling", {"csv": bad,
                                  "summary": SAMPLES / "gmc_moments_summary.json"},
                      str(tmp_path / "x.png"))
    with pytest.raises(SchemaMismatch) as err:
        render(spec)
    assert "estimate" in err.value.missing


def test_empty_csv_fails_loudly(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("observable,ensemble,value\n")
    spec = FigureSpec("invariance-hist", {"csv": empty,
                                          "summary": SAMPLES / "invariance.json"},
                      str(tmp_path / "x.png"))
    with pytest.raises(SchemaMismatch):
        render(spec)


def test_unknown_kind_rejected(tmp_path):
    with pytest.raises(ValueError):
        FigureSpec("pie-chart", {}, str(tmp_path / "x.png"))
