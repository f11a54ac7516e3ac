from setuptools import find_packages, setup

setup(
    name="casimir-dipoles",
    version="0.1.0",
    description="Casimir and van der Waals interactions between clusters of polarizable particles",
    packages=find_packages(exclude=["tests"]),
    package_data={"casimir_dipoles.data": ["materials.json"]},
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.24.0",
        "scipy>=1.10.0",
        "pandas>=2.0.0",
        "openpyxl>=3.1.0",
        "pydantic>=2.5.0",
    ],
    entry_points={"console_scripts": ["casimir=casimir_dipoles.main:main"]},
)
