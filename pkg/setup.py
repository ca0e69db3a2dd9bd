#!/usr/bin/env python

"""The setup script."""

from typing import List

from setuptools import find_packages, setup

with open("README.rst") as readme_file:
    readme = readme_file.read()

with open("HISTORY.rst") as history_file:
    history = history_file.read()

requirements: List[str] = [
    "numpy>=1.22",
    "scipy>=1.8",
    "pandas>=1.4",
    "openpyxl>=3.0.9",
    "tabulate>=0.8.9",
    "pyyaml>=5.4.1",
]

test_requirements: List[str] = ["pytest>=7"]

setup(
    author="memo-qcd developers",
    python_requires=">=3.9",
    classifiers=[
        "Development Status :: 2 - Pre-Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: BSD License",
        "Natural Language :: English",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Topic :: Scientific/Engineering :: Physics",
    ],
    description="Quantum density estimation with density matrices and memetically designed feature map circuits.",
    entry_points={
        "console_scripts": [
            "memo-qcd=memo_qcd.__main__:main",
        ],
    },
    install_requires=requirements,
    extras_require={"testing": test_requirements},
    license="BSD license",
    long_description=readme + "\n\n" + history,
    include_package_data=True,
    keywords="memo-qcd quantum density estimation kernel",
    name="memo-qcd",
    packages=find_packages(include=["memo_qcd", "memo_qcd.*"]),
    test_suite="tests",
    tests_require=test_requirements,
    version="0.1.0",
    zip_safe=False,
)
