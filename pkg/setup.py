from setuptools import setup

setup(
    name="rigidnet",
    version="0.1.0",
    description="Signed angle rigidity of planar frameworks, with network localization and formation control simulators.",
    license="MIT License",
    packages=[
        "rigidnet",
        "rigidnet.numerics",
        "rigidnet.geometry",
        "rigidnet.graph",
        "rigidnet.rigidity",
        "rigidnet.ais",
        "rigidnet.localization",
        "rigidnet.formation",
        "rigidnet.plotting",
        "rigidnet.cli",
    ],
    install_requires=[
        "numpy",
        "scikit-learn>=1.0",
        "scipy>=1.7.1",
        "networkx>=2.6",
        "matplotlib",
    ],
    package_data={"rigidnet": ["templates/*.json"]},
    include_package_data=True,
    entry_points={"console_scripts": ["rigidnet=rigidnet.cli.cli:main"]},
)
