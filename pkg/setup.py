from setuptools import find_packages, setup

setup(
    name="pib-lab",
    version="1.0.0",
    description="Exact predictive information bottleneck experiments on finite worlds",
    packages=find_packages(include=["src", "src.*"]),
    python_requires=">=3.10",
    install_requires=[
        "numpy>=1.26",
        "scipy>=1.11",
        "pandas>=1.5",
    ],
    extras_require={"test": ["pytest>=8", "pytest-cov"], "bench": ["matplotlib>=3.8"]},
    entry_points={"console_scripts": ["pib = src.cli:main"]},
)
