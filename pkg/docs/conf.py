# Sphinx configuration for the grain-fusion API documentation.
import os
import sys

sys.path.insert(0, os.path.abspath("../src"))
import grainfuse  # noqa: E402

project = "Grain Fusion"
copyright = "2024, Grain Fusion developers"
author = "Grain Fusion developers"
release = grainfuse.__version__

extensions = ["sphinx.ext.autodoc", "sphinx_autodoc_typehints"]
templates_path = ["_templates"]
exclude_patterns = []

autodoc_member_order = "bysource"
typehints_document_rtype = False

html_theme = "nature"
html_static_path = []
