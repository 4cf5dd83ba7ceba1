from setuptools import find_packages, setup

setup(
    name="nskd",
    version="1.0.0",
    description="Key distribution secure against non-signaling adversaries: boxes, attacks, "
                "certified bounds and a protocol simulator",
    packages=find_packages(exclude=["tests"]),
    python_requires=">=3.8",
    install_requires=["numpy>=1.21.0", "pandas>=1.5.0"],
    extras_require={"test": ["pytest>=7.0.0"]},
    entry_points={"console_scripts": ["nskd=nskd.cli:main"]},
)
