from setuptools import find_packages, setup

from gapforge import __version__

with open("requirements.txt") as f:
    requirements = [line.strip() for line in f if line.strip() and not line.startswith("pytest")]

setup(
    name="gapforge",
    version=__version__,
    description="Bloch band structures of periodic Schrodinger operators and gap-to-midgap optimization",
    packages=find_packages(exclude=["tests"]),
    install_requires=requirements,
    python_requires=">=3.10",
    entry_points={"console_scripts": ["gapforge=gapforge.main:main"]},
)
