# setup
from setuptools import setup, find_packages

setup(
    name="pyfrbsplit",
    version="0.1.0",
    author="Your Name",
    description="Forward-reflected-backward splitting for nonconvex composite minimization, with baselines and a sparse-feasibility benchmark",
    license="MIT",
    packages=find_packages(exclude=["tests"]),
    python_requires=">=3.10",
    install_requires=[
        "numpy>=1.24",
        "scipy>=1.10",
        "pandas>=2.0",
    ],
    extras_require={"test": ["pytest>=7"]},
    entry_points={"console_scripts": ["frbsplit = frbsplit.cli:main"]},
)
