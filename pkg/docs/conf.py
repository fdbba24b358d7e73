# -*- coding: utf-8 -*-
"""
Sphinx configuration for the jointdiffusion documentation.
"""

import os
import sys

sys.path.insert(0, os.path.abspath('..'))

from jointdiffusion import __version__  # pylint: disable=C0413

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.intersphinx',
    'sphinx.ext.mathjax',
]

autodoc_member_order = 'bysource'
autodoc_default_options = {'undoc-members': False, 'show-inheritance': True}

master_doc = 'index'
project = 'jointdiffusion'
copyright = '2026, jointdiffusion contributors'  # pylint: disable=W0622

version = release = __version__

exclude_patterns = ['_build']
pygments_style = 'sphinx'
html_theme = 'default'
htmlhelp_basename = 'jointdiffusiondoc'

man_pages = [
    ('index', 'jointdiffusion', 'jointdiffusion Documentation',
     ['jointdiffusion contributors'], 1)
]

intersphinx_mapping = {
    'python': ('https://docs.python.org/3', None),
    'numpy': ('https://numpy.org/doc/stable', None),
    'pandas': ('https://pandas.pydata.org/docs', None),
    'scipy': ('https://docs.scipy.org/doc/scipy', None),
}
