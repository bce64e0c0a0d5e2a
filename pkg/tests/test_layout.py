import itertools

import numpy as np
import pytest

from cdom.core import DependenceModel, MatchConfig
from cdom.layout import (
    GridFrame,
    Layout,
    locality,
    mask_frame,
    neighbor_pairs,
    random_locality,
    rect_frame,
    summarize,
)
from cdom.matcher import median_model


def test_rect_single_cell():
    f = rect_frame(1, 1)
    assert f.n == 1 and f.shape == (1, 1)
    assert neighbor_pairs(f).shape == (0, 2)


def test_rect_row_major_and_pairs():
    f = rect_frame(2, 3)
    assert f.coords.tolist() == [[0, 0], [0, 1], [0, 2], [1, 0], [1, 1], [1, 2]]
    assert len(neighbor_pairs(f)) == 7


def test_rect_large():
    f = rect_frame(16, 20)
    assert f.n == 320 and f.shape == (16, 20)
    assert len(neighbor_pairs(f)) == 16 * 19 + 15 * 20
    with pytest.raises(ValueError):
        f.coords[0, 0] = 5


@pytest.mark.parametrize("rows,cols", [(0, 3), (3, 0)])
def test_rect_rejects_empty(rows, cols):
    with pytest.raises(ValueError):
        rect_frame(rows, cols)


def test_mask_plus_sign():
    f = mask_frame(".#.\n###\n.#.\n")
    assert f.n == 5 and f.shape == (3, 3)
    assert sorted(map(tuple, f.coords.astype(int).tolist())) == [(0, 1), (1, 0), (1, 1), (1, 2), (2, 1)]
    assert len(neighbor_pairs(f)) == 4


def test_mask_single():
    assert mask_frame("#").n == 1


@pytest.mark.parametrize(
    "text,msg",
    [("", "empty"), ("...\n...", "empty"), ("##\n#", "width"), ("#x#", "illegal")],
)
def test_mask_errors(text, msg):
    with pytest.raises(ValueError, match=msg):
        mask_frame(text)


def test_frame_rejects_duplicates():
    with pytest.raises(ValueError):
        GridFrame(np.array([[0, 0], [0, 0]]), "x")


def test_locality_by_hand():
    f = rect_frame(1, 3)
    feats = np.array([[0.0], [1.0], [5.0]])
    assert locality(feats, f, [0, 1, 2]) == pytest.approx((1 + 4) / 2)
    assert locality(feats, f, [1, 0, 2]) == pytest.approx((1 + 5) / 2)
    assert locality(feats, rect_frame(1, 1), [0]) == 0.0


def test_random_locality_deterministic():
    feats = np.random.default_rng(0).standard_normal((6, 2))
    a = random_locality(feats, rect_frame(2, 3), trials=10, seed=4)
    assert a.shape == (10,) and np.array_equal(a, random_locality(feats, rect_frame(2, 3), 10, 4))


def test_single_image():
    lay = summarize(np.ones((1, 4)), rect_frame(1, 1))
    assert lay.cell_to_feature.tolist() == [0] and lay.match is None


def test_count_mismatch():
    with pytest.raises(ValueError, match="frame size must equal image count"):
        summarize(np.ones((5, 2)), rect_frame(2, 3))


def test_features_equal_to_coordinates_are_placed_home():
    # when the features are the cell positions themselves, the identity
    # layout is a global HSIC maximum
    for frame in (rect_frame(2, 3), mask_frame(".#.\n###\n.#.")):
        x = frame.coords.copy()
        model = median_model(x, x, "hsic")
        lay = summarize(x, frame, model, MatchConfig(n_restarts=3))
        from cdom.dependence import score
        from cdom.core import Permutation

        best = max(
            score(lay.match.selected_model, x, frame.coords, Permutation(q))
            for q in itertools.permutations(range(frame.n))
        )
        assert lay.match.score == pytest.approx(best)
        assert lay.locality == pytest.approx(1.0)


def test_rows_listing():
    frame = rect_frame(1, 2)
    lay = Layout(__import__("cdom.core", fromlist=["Permutation"]).Permutation([1, 0]), 0.0, None)
    assert lay.rows(frame) == [(0, 0, 1), (0, 1, 0)]


def test_layout_beats_random_on_colors():
    from cdom.io import gen_color_clusters

    samples, _ = gen_color_clusters(n=48, n_clusters=4, seed=1)
    frame = rect_frame(6, 8)
    x = samples.data
    lay = summarize(x, frame, median_model(x, frame.coords, "hsic"), MatchConfig(n_restarts=4))
    assert lay.locality < np.median(random_locality(x, frame, 50))


@pytest.mark.slow
def test_lsom_layout_beats_random():
    from cdom.io import gen_color_clusters

    samples, _ = gen_color_clusters(n=60, n_clusters=4, seed=2)
    frame = rect_frame(6, 10)
    lay = summarize(samples.data, frame, cfg=MatchConfig(n_restarts=3))
    assert lay.locality < random_locality(samples.data, frame, 100).min()
