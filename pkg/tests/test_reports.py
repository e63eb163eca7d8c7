from __future__ import annotations

import csv
import io
import json

import numpy as np
import pytest
from jsonschema import ValidationError

from gsrhardy import reports

RESULTS = {"lhs": np.float64(1.5), "pot_term": 1.0, "rhs": 1.5, "residual": float("nan"),
           "stderr": np.float32(0.01), "pass": np.bool_(True)}


def _report(**kw):
    return reports.build_report("verify-gsr", {"command": "verify-gsr", "seed": 3}, RESULTS, True, **kw)


def test_jsonable_unwraps_numpy_and_nonfinite():
    out = reports.jsonable({"a": np.arange(3), "b": (np.int64(2), np.inf), 4: np.bool_(False)})
    assert out == {"a": [0, 1, 2], "b": [2, None], "4": False}
    assert type(out["a"][0]) is int


def test_build_and_dump_are_deterministic(tmp_path):
    rep = _report()
    assert rep["results"]["residual"] is None and rep["results"]["pass"] is True
    text = reports.dumps(rep)
    assert text == reports.dumps(_report()) and text.endswith("\n")
    path = tmp_path / "r.json"
    path.write_text(text)
    assert reports.load_report(path) == rep
    assert _report(wall_clock=0.5)["wall_clock_seconds"] == 0.5


def test_schema_rejects_malformed_reports():
    rep = _report()
    for mutate in (
        lambda r: r.update(extra=1),
        lambda r: r.update(command="plot"),
        lambda r: r["manifest"].pop("seed"),
        lambda r: r["results"].pop("lhs"),
        lambda r: r.update(schema_version=99),
    ):
        bad = json.loads(json.dumps(rep))
        mutate(bad)
        with pytest.raises(ValidationError):
            reports.validate_report(bad)


def test_csv_one_row_per_table_entry():
    table = reports.build_report("identities", {"command": "identities", "seed": 0},
                                 {"checks": [{"name": "a", "max_rel_err": 0.0}, {"name": "b", "max_rel_err": 1e-13}],
                                  "passed": True}, True)
    text = reports.to_csv([("t.json", table), ("r.json", _report())])
    rows = list(csv.DictReader(io.StringIO(text)))
    assert [r.get("checks.name") for r in rows] == ["a", "b", ""]
    assert rows[2]["residual"] == "" and rows[2]["manifest.seed"] == "3"
