"""Tests for CSV/JSON file formats and their error reporting."""

import json
import os

import numpy as np
import pytest

from projsel.dataio import (DataError, load_dataset, load_draws, load_stats,
                            read_table, save_draws, sha256_file, write_metadata,
                            write_path, write_stats, write_table)
from projsel.families import Dataset
from projsel.reference import DrawSet
from projsel.search import PerfStats, SolutionPath, suggest_size


def _write(path, text):
    with open(path, "w", newline="") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------


class TestLoadDataset:
    def test_three_row_integer_response(self, tmp_path):
        p = tmp_path / "d.csv"
        _write(p, "x1,x2,y\n0.5,1.0,1\n-0.2,0.0,3\n1.5,-1.0,2\n")
        data = load_dataset(str(p), response="y")
        assert data.N == 3 and data.J == 3
        assert data.columns == ["x1", "x2"]
        np.testing.assert_allclose(data.X, [[0.5, 1.0], [-0.2, 0.0],
                                            [1.5, -1.0]])
        np.testing.assert_array_equal(data.y, [1, 3, 2])

    def test_string_categories_with_declared_order(self, tmp_path):
        p = tmp_path / "d.csv"
        _write(p, "y,x\nlow,0.1\nhigh,0.2\nmid,0.3\n")
        data = load_dataset(str(p), response="y",
                            categories=["low", "mid", "high"])
        np.testing.assert_array_equal(data.y, [1, 3, 2])
        assert data.J == 3
        assert data.categories == ["low", "mid", "high"]

    def test_missing_value_names_row_and_column(self, tmp_path):
        p = tmp_path / "d.csv"
        _write(p, "x1,y\n0.5,1\n,2\n")
        with pytest.raises(DataError, match=r"row 2, column 'x1'"):
            load_dataset(str(p), response="y")

    def test_missing_response_names_row_and_column(self, tmp_path):
        p = tmp_path / "d.csv"
        _write(p, "x1,y\n0.5,1\n0.2,\n")
        with pytest.raises(DataError, match=r"row 2, column 'y'"):
            load_dataset(str(p), response="y")

    def test_unknown_category_located(self, tmp_path):
        p = tmp_path / "d.csv"
        _write(p, "y,x\nlow,0.1\noops,0.2\n")
        with pytest.raises(DataError, match=r"'oops' at row 2, column 'y'"):
            load_dataset(str(p), response="y", categories=["low", "high"])

    def test_non_numeric_predictor_located(self, tmp_path):
        p = tmp_path / "d.csv"
        _write(p, "x1,y\nabc,1\n")
        with pytest.raises(DataError, match=r"'abc' at row 1, column 'x1'"):
            load_dataset(str(p), response="y")

    def test_string_response_without_categories_is_an_error(self, tmp_path):
        p = tmp_path / "d.csv"
        _write(p, "x1,y\n0.5,low\n")
        with pytest.raises(DataError, match="ordered categories"):
            load_dataset(str(p), response="y")

    def test_missing_response_column(self, tmp_path):
        p = tmp_path / "d.csv"
        _write(p, "x1,x2\n0.5,1\n")
        with pytest.raises(DataError, match="no response column 'y'"):
            load_dataset(str(p), response="y")

    def test_ragged_row(self, tmp_path):
        p = tmp_path / "d.csv"
        _write(p, "x1,y\n0.5,1\n0.2\n")
        with pytest.raises(DataError, match="row 2 has 1 fields"):
            load_dataset(str(p), response="y")


# ---------------------------------------------------------------------------
# draws
# ---------------------------------------------------------------------------


class TestDrawsRoundTrip:
    def test_cumulative_round_trip_byte_identical(self, tmp_path):
        rng = np.random.default_rng(3)
        zetas = np.sort(rng.standard_normal((2, 3)), axis=1)
        betas = rng.standard_normal((2, 2))
        draws = DrawSet("cumulative", zetas=zetas, betas=betas, link="logit",
                        beta_names=["age", "dose"])
        p1 = tmp_path / "a.csv"
        p2 = tmp_path / "b.csv"
        save_draws(str(p1), draws)
        re1 = load_draws(str(p1), "cumulative-params", link="logit")
        np.testing.assert_array_equal(re1.zetas, zetas)
        np.testing.assert_array_equal(re1.betas, betas)
        assert re1.beta_names == ["age", "dose"]
        assert re1.link == "logit"
        save_draws(str(p2), re1)
        assert p1.read_bytes() == p2.read_bytes()

    def test_cumulative_header(self, tmp_path):
        draws = DrawSet("cumulative", zetas=[[-1.0, 1.0]], betas=[[0.5]],
                        beta_names=["x7"])
        p = tmp_path / "a.csv"
        save_draws(str(p), draws)
        header, rows = read_table(str(p))
        assert header == ["zeta_1", "zeta_2", "beta_x7"]
        assert len(rows) == 1

    def test_categorical_round_trip_byte_identical(self, tmp_path):
        rng = np.random.default_rng(4)
        J, P, S = 3, 2, 4
        intercepts = np.zeros((S, J))
        intercepts[:, 1:] = rng.standard_normal((S, J - 1))
        coefs = np.zeros((S, J, P))
        coefs[:, 1:, :] = rng.standard_normal((S, J - 1, P))
        draws = DrawSet("categorical", intercepts=intercepts, coefs=coefs,
                        beta_names=["a", "b"])
        p1 = tmp_path / "a.csv"
        p2 = tmp_path / "b.csv"
        save_draws(str(p1), draws)
        re1 = load_draws(str(p1), "categorical-params")
        np.testing.assert_array_equal(re1.intercepts, intercepts)
        np.testing.assert_array_equal(re1.coefs, coefs)
        assert re1.beta_names == ["a", "b"]
        save_draws(str(p2), re1)
        assert p1.read_bytes() == p2.read_bytes()

    def test_categorical_header_omits_category_one(self, tmp_path):
        draws = DrawSet("categorical",
                        intercepts=[[0.0, 0.3, -0.1]],
                        coefs=np.array([[[0.0], [0.5], [0.2]]]),
                        beta_names=["z"])
        p = tmp_path / "a.csv"
        save_draws(str(p), draws)
        header, _ = read_table(str(p))
        assert header == ["intercept_2", "intercept_3", "coef_2_z",
                          "coef_3_z"]

    def test_prob_tensor_round_trip(self, tmp_path):
        tensor = np.array([[[0.25, 0.75], [0.6, 0.4]]])
        draws = DrawSet("raw", tensor=tensor)
        p1 = tmp_path / "a.csv"
        p2 = tmp_path / "b.csv"
        save_draws(str(p1), draws)
        header, rows = read_table(str(p1))
        assert header == ["draw", "obs", "category", "prob"]
        assert len(rows) == 4
        assert rows[0] == ["1", "1", "1", "0.25"]
        re1 = load_draws(str(p1), "prob-tensor")
        np.testing.assert_array_equal(re1.tensor, tensor)
        save_draws(str(p2), re1)
        assert p1.read_bytes() == p2.read_bytes()

    def test_nonmonotone_thresholds_located_by_draw(self, tmp_path):
        p = tmp_path / "a.csv"
        lines = ["zeta_1,zeta_2,beta_x"]
        for s in range(10):
            if s == 6:
                lines.append("1.0,-1.0,0.0")
            else:
                lines.append("-1.0,1.0,0.0")
        _write(p, "\n".join(lines) + "\n")
        with pytest.raises(DataError, match="draw 7"):
            load_draws(str(p), "cumulative-params", link="probit")

    def test_tensor_missing_cell_located(self, tmp_path):
        p = tmp_path / "a.csv"
        _write(p, "draw,obs,category,prob\n1,1,1,0.5\n1,1,2,0.5\n"
                  "1,2,1,0.3\n")
        with pytest.raises(DataError,
                           match="draw 1, obs 2, category 2"):
            load_draws(str(p), "prob-tensor")

    def test_bad_kind(self, tmp_path):
        p = tmp_path / "a.csv"
        _write(p, "a\n1\n")
        with pytest.raises(DataError, match="unknown draws kind"):
            load_draws(str(p), "nope")

    def test_cumulative_wrong_header(self, tmp_path):
        p = tmp_path / "a.csv"
        _write(p, "a,b\n1,2\n")
        with pytest.raises(DataError, match="zeta_1"):
            load_draws(str(p), "cumulative-params", link="probit")

    def test_non_numeric_draw_value_located(self, tmp_path):
        p = tmp_path / "a.csv"
        _write(p, "zeta_1,beta_x\n0.0,oops\n")
        with pytest.raises(DataError, match=r"'oops' at row 1, column "
                                            r"'beta_x'"):
            load_draws(str(p), "cumulative-params", link="probit")


# ---------------------------------------------------------------------------
# tables, stats, metadata
# ---------------------------------------------------------------------------


def _toy_stats():
    rng = np.random.default_rng(11)
    lpds = np.log(rng.uniform(0.1, 0.9, size=(3, 40)))
    ref = np.log(rng.uniform(0.1, 0.9, size=40))
    return PerfStats("augmented", lpds, ref)


class TestTables:
    def test_write_read_table_round_trip(self, tmp_path):
        p = tmp_path / "t.csv"
        write_table(str(p), ["a", "b"], [[1, 0.5], [2, -0.25]])
        header, rows = read_table(str(p))
        assert header == ["a", "b"]
        assert rows == [["1", "0.5"], ["2", "-0.25"]]

    def test_floats_survive_round_trip_exactly(self, tmp_path):
        p = tmp_path / "t.csv"
        vals = [np.pi, 1 / 3, 1e-300, -2.2250738585072014e-308]
        write_table(str(p), ["v"], [[v] for v in vals])
        _, rows = read_table(str(p))
        assert [float(r[0]) for r in rows] == vals

    def test_stats_round_trip_and_suggest_size(self, tmp_path):
        stats = _toy_stats()
        p = tmp_path / "s.csv"
        write_stats(str(p), stats)
        re = load_stats(str(p))
        np.testing.assert_array_equal(re.sizes, stats.sizes)
        np.testing.assert_array_equal(re.mlpd, stats.mlpd)
        np.testing.assert_array_equal(re.se_delta, stats.se_delta)
        assert re.mlpd_ref == stats.mlpd_ref
        assert (suggest_size(re, multiplier=1.0).value
                == suggest_size(stats, multiplier=1.0).value)

    def test_load_stats_rejects_other_tables(self, tmp_path):
        p = tmp_path / "x.csv"
        write_table(str(p), ["a"], [[1]])
        with pytest.raises(DataError, match="header mismatch"):
            load_stats(str(p))

    def test_write_path_lists_predictors_in_order(self, tmp_path):
        path_obj = SolutionPath("augmented", "cumulative", "probit",
                                order=[2, 0], names=["x3", "x1"],
                                submodels=[None, None, None],
                                data=Dataset(np.zeros((2, 3)), [1, 2]))
        p = tmp_path / "p.csv"
        write_path(str(p), path_obj)
        header, rows = read_table(str(p))
        assert header == ["size", "predictor"]
        assert rows == [["1", "x3"], ["2", "x1"]]

    def test_empty_file_is_a_data_error(self, tmp_path):
        p = tmp_path / "e.csv"
        _write(p, "")
        with pytest.raises(DataError, match="empty file"):
            read_table(str(p))


class TestMetadata:
    def test_metadata_content_and_determinism(self, tmp_path):
        inp = tmp_path / "in.csv"
        _write(inp, "x,y\n1,1\n")
        p1 = tmp_path / "m1.json"
        p2 = tmp_path / "m2.json"
        cfg = {"seed": 7, "threads": 2}
        write_metadata(str(p1), "varsel", cfg, input_paths=[str(inp)])
        write_metadata(str(p2), "varsel", cfg, input_paths=[str(inp)])
        assert p1.read_bytes() == p2.read_bytes()
        meta = json.loads(p1.read_text())
        assert meta["command"] == "varsel"
        assert meta["config"] == cfg
        assert meta["inputs"][str(inp)] == sha256_file(str(inp))
        assert "pseudo_variance" in meta["formulas"]
        assert "timestamp" not in json.dumps(meta).lower()

    def test_sha256_matches_hashlib(self, tmp_path):
        import hashlib
        p = tmp_path / "f.bin"
        p.write_bytes(b"hello world")
        assert sha256_file(str(p)) == hashlib.sha256(b"hello world").hexdigest()


class TestAtomicity:
    def test_no_temp_files_left_behind(self, tmp_path):
        p = tmp_path / "t.csv"
        write_table(str(p), ["a"], [[1]])
        assert sorted(os.listdir(tmp_path)) == ["t.csv"]

    def test_write_into_new_directory(self, tmp_path):
        p = tmp_path / "sub" / "dir" / "t.csv"
        write_table(str(p), ["a"], [[1]])
        assert p.exists()
