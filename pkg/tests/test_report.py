import numpy as np

from saukit.core import SpatialMap
from saukit.metrics import EvalItem
from saukit.report import (
    render_activation_figure,
    render_psnr_figure,
    render_score_figure,
    write_items_csv,
)


def _items():
    return [
        EvalItem(id="item-0000", detected_trigger=False, score=0.0125, psnr_vs_reference=31.25),
        EvalItem(id="item-0001", detected_trigger=True, score=0.875, psnr_vs_reference=float("inf")),
    ]


def test_csv_layout_and_capping(tmp_path):
    path = tmp_path / "items.csv"
    write_items_csv(path, _items())
    lines = path.read_text().splitlines()
    assert lines[0] == "id,detected_trigger,score,psnr_db"
    assert lines[1] == "item-0000,0,0.0125,31.25"
    assert lines[2] == "item-0001,1,0.875,99.0"


def test_csv_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_items_csv(a, _items())
    write_items_csv(b, _items())
    assert a.read_bytes() == b.read_bytes()


def test_figures_render_and_are_deterministic(tmp_path):
    rng = np.random.default_rng(91)
    cal_scores = rng.normal(0.0, 0.01, size=32).tolist()
    item_scores = rng.normal(0.5, 0.05, size=32).tolist()
    psnrs = rng.uniform(20, 40, size=32).tolist() + [float("inf")]
    activation = SpatialMap(rng.uniform(0, 2, size=(16, 16)).astype(np.float32))

    for name, render in (
        ("scores", lambda p: render_score_figure(p, cal_scores, item_scores, 0.03)),
        ("psnr", lambda p: render_psnr_figure(p, psnrs)),
        ("activation", lambda p: render_activation_figure(p, activation)),
    ):
        first = tmp_path / f"{name}_1.png"
        second = tmp_path / f"{name}_2.png"
        render(first)
        render(second)
        blob = first.read_bytes()
        assert blob[:4] == b"\x89PNG"
        assert len(blob) > 1000
        assert blob == second.read_bytes()
