# Sphinx configuration for the vqapython reference docs
import os
import sys
sys.path.append(os.path.abspath('./ext'))

project = 'vqapython'
copyright = '2021, Matthew Reid'
author = 'Matthew Reid'
release = '0.1.0'

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.napoleon',
    'sphinx.ext.viewcode',
    'sphinx.ext.intersphinx',
    'eventobj',
]
autodoc_member_order = 'bysource'
autodoc_default_options = {
    'show-inheritance':True,
}

html_theme = 'sphinx_rtd_theme'

intersphinx_mapping = {
    'python':('https://docs.python.org/3', None),
    'pydispatch': ('https://python-dispatch.readthedocs.io/en/latest/', None),
    'numpy': ('https://numpy.org/doc/stable/', None),
    'scipy': ('https://docs.scipy.org/doc/scipy/', None),
}
