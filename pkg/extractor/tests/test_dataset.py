import pytest

from conftest import make_tree
from rail_extract import DatasetNotFound, EmptyClassList, resolve_dataset, scan_dataset


class TestResolve:
    def test_directory_path_wins(self, pets_dir):
        assert resolve_dataset(str(pets_dir)) == pets_dir

    def test_lookup_under_env_root(self, tmp_path, monkeypatch):
        make_tree(tmp_path / "flowers")
        monkeypatch.setenv("RAIL_DATASETS", str(tmp_path))
        assert resolve_dataset("flowers") == tmp_path / "flowers"

    def test_missing_everywhere(self, tmp_path, monkeypatch):
        monkeypatch.delenv("RAIL_DATASETS", raising=False)
        with pytest.raises(DatasetNotFound):
            resolve_dataset(str(tmp_path / "nope"))

    def test_message_mentions_env_root(self, tmp_path, monkeypatch):
        monkeypatch.setenv("RAIL_DATASETS", str(tmp_path))
        with pytest.raises(DatasetNotFound, match="RAIL_DATASETS"):
            resolve_dataset("nope")


class TestScan:
    def test_split_layout(self, pets_dir):
        data = scan_dataset(pets_dir)
        assert data.name == "pets"
        assert sorted(data.splits) == ["test", "train"]
        assert data.class_names == ["husky", "tabby", "zebra"]
        assert data.count("train") == 12
        assert data.count("test") == 6

    def test_flat_layout_is_one_train_split(self, tmp_path):
        root = make_tree(tmp_path / "flat", flat=True, per_class=3)
        data = scan_dataset(root)
        assert list(data.splits) == ["train"]
        assert data.count("train") == 9

    def test_class_names_are_sorted_union(self, tmp_path):
        root = make_tree(tmp_path / "ds", splits={
            "train": {"zebra": 2, "ant": 2},
            "test": {"ant": 1, "moth": 1},
        })
        data = scan_dataset(root)
        assert data.class_names == ["ant", "moth", "zebra"]
        # A class absent from one split is present with zero files.
        assert data.splits["train"]["moth"] == []
        assert len(data.splits["test"]["moth"]) == 1

    def test_file_lists_are_sorted(self, pets_dir):
        data = scan_dataset(pets_dir)
        files = data.splits["train"]["husky"]
        assert files == sorted(files)

    def test_non_image_files_ignored(self, tmp_path):
        root = make_tree(tmp_path / "ds", splits={"train": 2})
        (root / "train" / "husky" / "notes.txt").write_text("not an image")
        (root / "train" / "husky" / "checksums.md5").write_text("x")
        data = scan_dataset(root)
        assert len(data.splits["train"]["husky"]) == 2

    def test_no_class_dirs(self, tmp_path):
        (tmp_path / "empty").mkdir()
        with pytest.raises(EmptyClassList):
            scan_dataset(tmp_path / "empty")

    def test_imageless_split(self, tmp_path):
        root = make_tree(tmp_path / "ds", splits={"train": 2})
        (root / "test" / "husky").mkdir(parents=True)
        with pytest.raises(EmptyClassList, match="test"):
            scan_dataset(root)
