"""Properties for creating wheels to be distributed."""
# type: ignore
import setuptools

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

setuptools.setup(
    name="EqpAL",
    version="0.1.0",
    description=(
        "EqpAL is a Python module for PDE-constrained optimization with "
        "hyperreduced trust-region models inside an augmented Lagrangian."
    ),
    long_description=long_description,
    long_description_content_type="text/markdown",
    classifiers=[
        "Development Status :: 3 - Alpha",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Natural Language :: English",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    packages=[
        "eqpal",
        "eqpal.data",
        "eqpal.io",
        "eqpal.methods",
    ],
    python_requires=">=3.8",
    install_requires=[
        "aenum == 3.1.11",
        "click ~= 8.0.2",
        "numpy ~= 1.23.0",
        "pandas ~= 1.5.1",
        "scipy ~= 1.9.3",
    ],
    entry_points={
        "console_scripts": ["eqpal = eqpal.cli:cli"],
    },
)
