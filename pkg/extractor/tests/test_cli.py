import subprocess
import sys

import numpy as np
from rail import load_embeddings

from rail_extract.cli import main


class TestCli:
    def test_successful_run(self, pets_dir, tmp_path, capsys):
        rc = main(["--dataset", str(pets_dir), "--model", "fake:16",
                   "--out-dir", str(tmp_path / "out")])
        assert rc == 0
        lines = capsys.readouterr().out.strip().split("\n")
        assert len(lines) == 3
        assert all(line.startswith("wrote ") for line in lines)
        assert "text table" in lines[0]
        ds = load_embeddings(tmp_path / "out" / "pets.train.emb")
        assert ds.feature_dim == 16

    def test_missing_dataset(self, tmp_path, capsys):
        rc = main(["--dataset", str(tmp_path / "nope"), "--model", "fake:16",
                   "--out-dir", str(tmp_path / "out")])
        assert rc == 2
        assert capsys.readouterr().err.startswith("error:")

    def test_bad_model(self, pets_dir, tmp_path, capsys):
        rc = main(["--dataset", str(pets_dir), "--model", "resnet50",
                   "--out-dir", str(tmp_path / "out")])
        assert rc == 2
        assert "model identifier" in capsys.readouterr().err

    def test_bad_template(self, pets_dir, tmp_path, capsys):
        rc = main(["--dataset", str(pets_dir), "--model", "fake:16",
                   "--out-dir", str(tmp_path / "out"),
                   "--prompt-template", "no placeholder"])
        assert rc == 2
        assert "placeholder" in capsys.readouterr().err

    def test_max_per_class_flag(self, pets_dir, tmp_path, capsys):
        rc = main(["--dataset", str(pets_dir), "--model", "fake:16",
                   "--out-dir", str(tmp_path / "out"),
                   "--max-per-class", "2"])
        assert rc == 0
        ds = load_embeddings(tmp_path / "out" / "pets.train.emb")
        assert np.bincount(ds.labels).tolist() == [2, 2, 2]

    def test_module_entry(self):
        proc = subprocess.run([sys.executable, "-m", "rail_extract",
                               "--help"], capture_output=True, text=True)
        assert proc.returncode == 0
        assert "--prompt-template" in proc.stdout
