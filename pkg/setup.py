from setuptools import find_packages, setup

setup(
    name="jaxsw",
    packages=find_packages(include=["jaxsw", "jaxsw.*"]),
    install_requires=[
        "numpy",
        "jax",
        "flax",
        "chex",
        "ml_collections",
        "absl-py",
        "scipy",
        "tqdm",
    ],
)
