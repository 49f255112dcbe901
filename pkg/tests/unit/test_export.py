"""
Unit tests for the CSV and JSON writers

Tests cover:
- Metadata comment block, header and rows
- Deterministic output for identical input
- JSON conversion of floats and extended-precision values
"""

import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from layerbvp.export import read_csv, write_csv, write_json


class TestCsv:
    """Test write_csv / read_csv"""

    @pytest.mark.unit
    def test_layout(self, temp_output_dir):
        """Test sorted metadata comments above the header"""
        path = write_csv(temp_output_dir / "out.csv", ["x", "y"], [[0, 1], [0.5, -0.25]],
                         {"epsilon": 0.1, "branch": "m"})
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines == ["# branch=m", "# epsilon=0.1", "x,y", "0,1", "0.5,-0.25"]

    @pytest.mark.unit
    def test_read_back(self, temp_output_dir):
        """Test that read_csv splits metadata, header and rows"""
        path = write_csv(temp_output_dir / "out.csv", ["s", "residual"], [["1", "2"]],
                         {"note": "two\nlines"})
        meta, header, rows = read_csv(path)
        assert meta == {"note": "two lines"}
        assert header == ["s", "residual"]
        assert rows == [["1", "2"]]

    @pytest.mark.unit
    def test_creates_parent(self, temp_output_dir):
        """Test that missing directories are created"""
        path = write_csv(temp_output_dir / "a" / "b" / "out.csv", ["x"], [])
        assert path.exists()

    @pytest.mark.unit
    def test_deterministic(self, temp_output_dir):
        """Test byte-identical files for identical input"""
        a = write_csv(temp_output_dir / "a.csv", ["x"], [[1], [2]], {"k": "v", "a": 1})
        b = write_csv(temp_output_dir / "b.csv", ["x"], [[1], [2]], {"a": 1, "k": "v"})
        assert a.read_bytes() == b.read_bytes()


class TestJson:
    """Test write_json"""

    @pytest.mark.unit
    def test_scalars(self, temp_output_dir, ext50):
        """Test that floats and mpf values become decimal strings"""
        payload = {"b": 0.1, "a": ext50.one / 3, "n": 3, "ok": True, "none": None,
                   "nested": {"values": (1.5, "x")}}
        path = write_json(temp_output_dir / "out.json", payload)
        data = json.loads(path.read_text(encoding="utf-8"))
        assert data["b"] == "0.1"
        assert data["a"].startswith("0.33333333333333333333")
        assert data["n"] == 3
        assert data["ok"] is True
        assert data["none"] is None
        assert data["nested"] == {"values": ["1.5", "x"]}

    @pytest.mark.unit
    def test_sorted_and_terminated(self, temp_output_dir):
        """Test sorted keys and a trailing newline"""
        path = write_json(temp_output_dir / "out.json", {"z": 1, "a": 2})
        text = path.read_text(encoding="utf-8")
        assert text.index('"a"') < text.index('"z"')
        assert text.endswith("\n")
        assert text == write_json(temp_output_dir / "again.json", {"a": 2, "z": 1}).read_text(
            encoding="utf-8")
