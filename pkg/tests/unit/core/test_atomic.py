"""Tests for atomic file helpers."""

import pytest

from core.atomic import atomic_directory, atomic_write_text


class TestAtomicWrites:
    """Test cases for atomic_write_text and atomic_directory."""

    def test_write_text_creates_parents(self, tmp_path):
        """Parent directories are created and no temp file is left behind."""
        path = tmp_path / "a" / "b" / "out.csv"
        atomic_write_text(path, "x,y\n")
        assert path.read_text() == "x,y\n"
        assert [p.name for p in path.parent.iterdir()] == ["out.csv"]

    def test_directory_replaces_existing(self, tmp_path):
        """A committed directory replaces the previous one."""
        target = tmp_path / "ckpt"
        target.mkdir()
        (target / "old.txt").write_text("old")
        with atomic_directory(target) as staging:
            (staging / "new.txt").write_text("new")
        assert sorted(p.name for p in target.iterdir()) == ["new.txt"]

    def test_directory_failure_keeps_previous(self, tmp_path):
        """An exception inside the block leaves the old directory intact."""
        target = tmp_path / "ckpt"
        target.mkdir()
        (target / "old.txt").write_text("old")
        with pytest.raises(RuntimeError):
            with atomic_directory(target) as staging:
                (staging / "partial.txt").write_text("partial")
                raise RuntimeError("interrupted")
        assert sorted(p.name for p in target.iterdir()) == ["old.txt"]
        assert sorted(p.name for p in tmp_path.iterdir()) == ["ckpt"]
