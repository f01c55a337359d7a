"""
setuptools config for the PQM toolkit.

Usage:
    # Development mode (editable install):
    pip install -e .

    # Then:
    pqm retrieve --memory fixtures/memory_pair.txt --input 0000
"""

from setuptools import setup

APP_NAME = "pqm-toolkit"

setup(
    name=APP_NAME,
    version="0.1.0",
    description="Probabilistic quantum memory simulator, weightless classifier and small-device compiler",
    python_requires=">=3.10",
    py_modules=[
        "models",
        "errors",
        "interfaces",
        "config",
        "quantum_sim",
        "pqm_core",
        "classifier",
        "data_pipeline",
        "nisq_compile",
        "diagnostics",
        "reports",
        "main",
    ],
    install_requires=[
        "numpy>=1.26",
        "scipy>=1.11",
        "pandas>=2.1",
    ],
    extras_require={
        "test": ["pytest>=8.0", "pytest-cov>=5.0"],
    },
    entry_points={"console_scripts": ["pqm=main:main"]},
)
