from setuptools import setup, find_packages

setup(
    name="relemb",
    version="0.1.0",
    description="Relevance-based word embeddings for query expansion and query classification",
    packages=find_packages(include=["src", "src.*", "config"]),
    package_data={"src.index": ["data/*.txt"], "config": ["*.yaml"]},
    python_requires=">=3.8",
    install_requires=[
        "numpy>=1.21.0",
        "scipy>=1.7.0",
        "pandas>=1.3.0",
        "scikit-learn>=1.0.0",
        "joblib>=1.1.0",
        "pyyaml>=6.0",
        "pydantic>=2.0",
        "tqdm>=4.60.0",
    ],
    entry_points={"console_scripts": ["relemb=src.pipeline.cli:main"]},
)
