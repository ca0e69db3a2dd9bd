import hashlib
import json

import pandas as pd

from memo_qcd import __version__
from memo_qcd.console import print_box
from memo_qcd.manifest import RunManifest, file_hash, store_log


def test_file_hash(tmp_path):
    """Test the artifact hash."""
    path = tmp_path / "a.txt"
    path.write_bytes(b"memo")
    assert file_hash(path) == hashlib.sha256(b"memo").hexdigest()


def test_manifest_document(tmp_path):
    """Test the JSON manifest of a run."""
    artifact = tmp_path / "out.csv"
    artifact.write_text("1,2\n")

    manifest = RunManifest(command="datagen", config={"n": 2}, seeds={"datagen": 0})
    manifest.add_artifact(artifact)
    manifest.finish()
    manifest.save(tmp_path / "run.manifest.json")

    document = json.loads((tmp_path / "run.manifest.json").read_text())
    assert document["command"] == "datagen"
    assert document["tool_version"] == __version__
    assert document["artifacts"] == {str(artifact): file_hash(artifact)}
    assert document["wall_clock"] >= 0


def test_manifest_frame():
    """Test the flat table form of a manifest."""
    manifest = RunManifest(command="kld", config={"k": 5}, seeds={"kld": 1})
    df = manifest.to_frame()
    assert list(df.columns) == ["section", "key", "value"]
    assert set(df["section"]) == {"run", "config", "seeds"}


def test_store_log(tmp_path):
    """Test the excel and markdown run logs."""
    manifest = RunManifest(command="train", config={"epochs": 3})
    results = pd.DataFrame({"epoch": [0, 1], "log_likelihood": [-2.0, -1.5]})
    base = store_log(manifest, tmp_path / "logs", results)

    assert base.parent == tmp_path / "logs"
    assert base.name.startswith("train_")
    markdown = (tmp_path / "logs" / (base.name + ".md")).read_text()
    assert "log_likelihood" in markdown
    sheets = pd.read_excel(str(base) + ".xlsx", sheet_name=None)
    assert list(sheets) == ["manifest", "results"]


def test_print_box(capsys):
    """Test the boxed console message."""
    box = print_box("done", min_length=10, print_str=False)
    assert box.splitlines()[1] == "* done       *"
    assert capsys.readouterr().out == ""
