import io

import pytest

from src.errors import InputError
from src.report_io import csv_text, jsonl_text, load_document, read_csv_columns, render_table, use_color


def test_render_table_aligns_columns():
    text = render_table(("name", "n"), [("alpha", 1), ("b", 22)])
    assert text.splitlines() == ["name   n", "-----  --", "alpha  1", "b      22"]


def test_csv_and_jsonl():
    assert csv_text(("a", "b"), [(1, "x,y")]) == 'a,b\n1,"x,y"\n'
    assert jsonl_text([{"a": 1}, {"b": [2]}]) == '{"a": 1}\n{"b": [2]}\n'


def test_color_is_off_for_pipes_and_when_disabled(monkeypatch):
    assert not use_color(io.StringIO())
    monkeypatch.setenv("MC_NO_COLOR", "1")

    class Tty(io.StringIO):
        def isatty(self):
            return True

    assert not use_color(Tty())


def test_read_csv_columns_keeps_line_numbers(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("a,b\n1,\n2,3\n")
    assert read_csv_columns(path) == {"a": [(2, "1"), (3, "2")], "b": [(3, "3")]}


def test_load_document_errors(tmp_path):
    with pytest.raises(InputError, match="cannot read"):
        load_document(tmp_path / "missing.json")
    bad = tmp_path / "bad.yaml"
    bad.write_text("a: [1\n")
    with pytest.raises(InputError, match="malformed"):
        load_document(bad)
