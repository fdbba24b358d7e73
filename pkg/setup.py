#!/usr/bin/env python
"""
jointdiffusion
"""

from setuptools import setup, find_packages
from jointdiffusion import __version__ as version

INSTALL_REQUIRES = [
    'numpy>=1.20',
    'scipy>=1.7',
    'pandas>=1.3',
    'click>=7.0',
    'arviz>=0.15,<1',
]
TESTS_REQUIRES = [
    'pytest',
    'pytest-cov',
    'pylint',
    'tox',
]


setup(
    name='jointdiffusion',
    version=version,
    description='Joint platform and complement diffusion toolkit',
    author='jointdiffusion contributors',
    packages=find_packages(exclude=["*test*"]),
    package_data={'jointdiffusion': ['data/*.csv']},
    install_requires=INSTALL_REQUIRES,
    tests_require=TESTS_REQUIRES,
    extras_require={
        "test": TESTS_REQUIRES,
        "docs": ["sphinx"],
    },
    entry_points={
        'console_scripts': [
            'jointdiffusion=jointdiffusion.cli:cli',
        ],
    },
    python_requires='>=3.8',
    license='MIT',
    keywords='bass diffusion kalman filter mcmc platform complements forecasting',
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Programming Language :: Python",
        "Programming Language :: Python :: 3",
        "Topic :: Scientific/Engineering :: Mathematics",
        "Topic :: Software Development :: Libraries :: Python Modules",
    ]
)
