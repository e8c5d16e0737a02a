from setuptools import find_packages, setup

setup(
    name="blowuplab",
    version="0.1.0",
    description="Numerical laboratory for blow-up curves of the radial semilinear wave equation.",
    python_requires=">=3.10",
    package_dir={"": "src"},
    packages=find_packages("src"),
    include_package_data=True,
    package_data={"blowuplab": ["builtin_configs/*.yaml"]},
    install_requires=[
        "numpy>=1.26",
        "prompt_toolkit>=3.0.0",
        "pyyaml>=6.0",
        "python-dotenv>=1.0.0",
        "scipy>=1.11",
        "tomli>=2.0; python_version < '3.11'",
    ],
    extras_require={
        "dev": [
            "hypothesis>=6.100",
            "mypy>=1.12.0",
            "pytest>=8.0.0",
            "ruff>=0.8.0",
            "types-PyYAML>=6.0.12.20240917",
        ]
    },
    entry_points={"console_scripts": ["blowuplab=blowuplab.main:main"]},
)
