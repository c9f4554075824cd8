import numpy as np
import pytest

from oracles import ridge_gd
from sparsematch import dictionary
from sparsematch.dictionary import (Dictionary, fit_dictionary, load_dictionary,
                                    normal_equation_residual, ridge_objective,
                                    save_dictionary)
from sparsematch.errors import ConfigError, CorruptionError, FormatError, NumericError
from sparsematch.graph import knn_graph
from sparsematch.spectral import embed


def test_identity_data_returns_embedding():
    y = np.random.default_rng(0).standard_normal((6, 4))
    d = fit_dictionary(np.eye(6), y, alpha=0.0)
    np.testing.assert_allclose(d.b, y, atol=1e-14)


def test_shrinkage_is_monotone():
    rng = np.random.default_rng(1)
    x, y = rng.standard_normal((5, 12)), rng.standard_normal((12, 7))
    norms = [np.linalg.norm(fit_dictionary(x, y, a).b)
             for a in (0.0, 0.1, 1.0, 10.0, 1e3, 1e6)]
    assert all(a > b for a, b in zip(norms, norms[1:]))
    assert norms[-1] < 1e-3


def test_matches_gradient_descent_8x20():
    rng = np.random.default_rng(2)
    x, y = rng.standard_normal((8, 20)), rng.standard_normal((20, 12))
    d = fit_dictionary(x, y, 0.1)
    ref = ridge_gd(x, y, 0.1)
    assert abs(ridge_objective(x, y, d.b, 0.1) - ridge_objective(x, y, ref, 0.1)) <= 1e-8


def test_is_a_minimum():
    rng = np.random.default_rng(3)
    x, y = rng.standard_normal((4, 9)), rng.standard_normal((9, 6))
    d = fit_dictionary(x, y, 0.5)
    base = ridge_objective(x, y, d.b, 0.5)
    for _ in range(20):
        bump = 1e-4 * rng.standard_normal(d.b.shape)
        assert ridge_objective(x, y, d.b + bump, 0.5) > base
    assert normal_equation_residual(x, y, d.b, 0.5) <= 1e-10


def test_accepts_embedding_object():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((3, 30))
    emb = embed(knn_graph(x, p=4), 5)
    assert fit_dictionary(x, emb).b.shape == (3, 5)
    np.testing.assert_array_equal(fit_dictionary(x, emb).b, fit_dictionary(x, emb.y).b)


def test_singular_without_ridge():
    x = np.zeros((3, 10))
    x[0] = 1.0
    with pytest.raises(NumericError, match="alpha > 0"):
        fit_dictionary(x, np.ones((10, 2)), alpha=0.0)
    assert np.all(np.isfinite(fit_dictionary(x, np.ones((10, 2)), alpha=0.1).b))


def test_bad_arguments():
    with pytest.raises(ConfigError):
        fit_dictionary(np.ones((2, 5)), np.ones((4, 3)))
    with pytest.raises(ConfigError):
        fit_dictionary(np.ones((2, 5)), np.ones((5, 3)), alpha=-1)


def test_unit_norm_atoms():
    rng = np.random.default_rng(5)
    d = fit_dictionary(rng.standard_normal((4, 10)), rng.standard_normal((10, 6)),
                       unit_norm=True)
    np.testing.assert_allclose(np.linalg.norm(d.b, axis=0), 1, atol=1e-14)
    assert d.meta["unit_norm"] == "true"


@pytest.mark.parametrize("k,flag,label", [(96, True, "overcomplete"),
                                          (64, False, "complete"),
                                          (32, False, "undercomplete")])
def test_completeness(k, flag, label):
    d = Dictionary(np.zeros((64, k)))
    assert d.overcomplete is flag and d.completeness == label


def test_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(6)
    d = Dictionary(rng.standard_normal((64, 96)), 0.1, {"config_hash": "abc", "n": "480"})
    path = tmp_path / "d.spmd"
    save_dictionary(d, path)
    loaded = load_dictionary(path)
    assert loaded == d and loaded.overcomplete
    assert loaded.b.tobytes() == d.b.tobytes()
    save_dictionary(loaded, tmp_path / "again.spmd")
    assert path.read_bytes() == (tmp_path / "again.spmd").read_bytes()


def test_truncated_and_flipped_rejected(tmp_path):
    path = tmp_path / "d.spmd"
    save_dictionary(Dictionary(np.arange(12.0).reshape(3, 4), 0.1), path)
    data = path.read_bytes()
    for bad in (data[:-1], data[: len(data) // 2], data[:5],
                data[:40] + bytes([data[40] ^ 1]) + data[41:]):
        path.write_bytes(bad)
        with pytest.raises(CorruptionError):
            load_dictionary(path)


def test_wrong_magic_and_version(tmp_path, monkeypatch):
    path = tmp_path / "d.spmd"
    monkeypatch.setattr(dictionary, "VERSION", 7)
    save_dictionary(Dictionary(np.ones((2, 2))), path)
    monkeypatch.undo()
    with pytest.raises(FormatError, match="version"):
        load_dictionary(path)
    path.write_bytes(b"SPMC" + b"\0" * 20)
    with pytest.raises(FormatError):
        load_dictionary(path)


def test_missing_file(tmp_path):
    with pytest.raises(FormatError):
        load_dictionary(tmp_path / "nope.spmd")


def test_failed_write_leaves_old_file(tmp_path, monkeypatch):
    path = tmp_path / "d.spmd"
    save_dictionary(Dictionary(np.ones((2, 2))), path)
    before = path.read_bytes()

    def boom(*_):
        raise OSError("disk full")
    monkeypatch.setattr("os.replace", boom)
    with pytest.raises(OSError):
        save_dictionary(Dictionary(np.zeros((2, 2))), path)
    assert path.read_bytes() == before
    assert [p.name for p in tmp_path.iterdir()] == ["d.spmd"]
