import itertools
import json

import jsonschema
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from cdom import io
from cdom.core import MatchConfig, Permutation, matched_accuracy
from cdom.matcher import median_model, run_match


def test_csv_variants(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("1,2\n\n 3 ,4.5e0\r\n-0,1e-300\n")
    assert io.load_matrix(p).tolist() == [[1, 2], [3, 4.5], [0, 1e-300]]
    p.write_text("7\n8\n")
    assert io.load_samples(p).data.shape == (2, 1)


@pytest.mark.parametrize(
    "text,msg",
    [("1,2\n3\n", ":2: expected 2 columns"), ("1\nabc\n", ":2: non-numeric"), ("1\nnan\n", ":2: non-finite"), ("\n\n", "empty")],
)
def test_csv_errors_name_the_line(tmp_path, text, msg):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(ValueError, match=msg):
        io.load_matrix(p)


def test_csv_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    m = rng.standard_normal((100, 50)) * 10.0 ** rng.integers(-300, 300, (100, 50))
    io.save_matrix(m, tmp_path / "a.csv")
    back = io.load_matrix(tmp_path / "a.csv")
    assert back.tobytes() == m.tobytes()
    io.save_matrix(back, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


@settings(max_examples=30, deadline=None)
@given(hnp.arrays(np.float64, hnp.array_shapes(min_dims=2, max_dims=2, max_side=6),
                  elements=st.floats(allow_nan=False, allow_infinity=False)))
def test_csv_round_trip_property(tmp_path_factory, m):
    p = tmp_path_factory.mktemp("csv") / "m.csv"
    io.save_matrix(m, p)
    assert np.array_equal(io.load_matrix(p), m + 0.0)


def test_permutation_files(tmp_path):
    p = Permutation([2, 0, 1])
    io.save_permutation(p, tmp_path / "p.txt")
    assert (tmp_path / "p.txt").read_text() == "2\n0\n1\n"
    assert io.load_permutation(tmp_path / "p.txt") == p
    (tmp_path / "bad.txt").write_text("0\nx\n")
    with pytest.raises(ValueError, match=":2:"):
        io.load_permutation(tmp_path / "bad.txt")
    (tmp_path / "dup.txt").write_text("0\n0\n")
    with pytest.raises(ValueError):
        io.load_permutation(tmp_path / "dup.txt")


def test_gen_cubic_exact():
    x, y, truth = io.gen_cubic(30, seed=4)
    assert np.all(np.abs(x.data) <= 1)
    assert np.array_equal(y.data[truth.map, 0], x.data[:, 0] ** 3)
    x2, y2, t2 = io.gen_cubic(30, seed=4)
    assert np.array_equal(x2.data, x.data) and np.array_equal(y2.data, y.data) and t2 == truth


def test_split_halves_shapes_and_truth():
    x, y, truth = io.gen_split_halves(n=12, d=10, noise=0.0, seed=1)
    assert x.data.shape == (12, 5) and y.data.shape == (12, 5)
    xm, ym, tm = io.gen_split_halves(n=12, d=10, noise=0.0, seed=1, mirror=True)
    # mirror-symmetric signals: the right half reversed is the left half
    assert np.allclose(ym.data[tm.map], xm.data)


def test_mirror_split_brute_force_recovers_truth():
    x, y, truth = io.gen_split_halves(n=5, d=8, noise=0.0, seed=2, mirror=True)
    err = lambda q: np.sum((x.data - y.data[list(q)]) ** 2)
    best = min(itertools.permutations(range(5)), key=err)
    assert Permutation(best) == truth


def test_extreme_noise_still_valid():
    x, y, truth = io.gen_split_halves(n=20, d=6, noise=1e6, seed=3)
    assert np.all(np.isfinite(y.data))
    r = run_match(x, y, median_model(x, y, "hsic"), MatchConfig(n_restarts=2))
    assert 0.0 <= matched_accuracy(r.permutation, truth) <= 1.0


@pytest.mark.parametrize("kw", [dict(n=1), dict(d=7), dict(d=0), dict(noise=-1.0)])
def test_split_rejects_bad_args(kw):
    with pytest.raises(ValueError):
        io.gen_split_halves(**kw)


def test_color_clusters():
    s, labels = io.gen_color_clusters(n=50, n_clusters=3, seed=5)
    assert s.data.shape == (50, 3) and set(labels) <= {0, 1, 2}


@pytest.fixture(scope="module")
def result():
    x, y, _ = io.gen_cubic(30, seed=1)
    cfg = MatchConfig(n_restarts=3, max_iterations=5)
    return run_match(x, y, median_model(x, y, "nocco", epsilon=0.05), cfg)


def test_result_validates_against_schema(tmp_path, result):
    schema = json.loads(io.schema_path().read_text())
    io.save_match_result(result, tmp_path / "r.json", extra={"accuracy": 0.5})
    doc = json.loads((tmp_path / "r.json").read_text())
    jsonschema.validate(doc, schema)
    assert all(len(rt["trace"]) <= 5 for rt in doc["restarts"])
    bad = dict(doc, permutation="oops")
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(bad, schema)


def test_result_round_trip(tmp_path, result):
    io.save_match_result(result, tmp_path / "r.json")
    doc = io.load_match_result(tmp_path / "r.json")
    assert doc["permutation"] == result.permutation
    assert doc["selected_model"] == result.selected_model
    assert doc["score"] == result.score
    assert io.load_permutation(tmp_path / "r.json") == result.permutation


def test_result_without_timestamp_is_reproducible(result):
    a = io.dumps_result(io.match_result_to_dict(result, timestamp=False))
    assert a == io.dumps_result(io.match_result_to_dict(result, timestamp=False))
    assert "created" not in a


def test_load_result_rejects_other_json(tmp_path):
    (tmp_path / "x.json").write_text('{"schema": "other"}')
    with pytest.raises(ValueError, match="not a"):
        io.load_match_result(tmp_path / "x.json")


def test_atomic_write_leaves_no_temp(tmp_path):
    io.atomic_write_text(tmp_path / "f.txt", "hi")
    assert [p.name for p in tmp_path.iterdir()] == ["f.txt"]
