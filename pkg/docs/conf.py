"""Sphinx configuration of the memo-qcd documentation."""
import os
import sys

sys.path.insert(0, os.path.abspath(".."))

import memo_qcd  # noqa: E402

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.viewcode",
    "sphinx_autodoc_typehints",
]

master_doc = "index"
exclude_patterns = ["_build"]

project = "memo-qcd"
author = "memo-qcd developers"
copyright = "2026, memo-qcd developers"
version = memo_qcd.__version__
release = memo_qcd.__version__

html_theme = "sphinx_rtd_theme"
html_short_title = f"{project}-{version}"
