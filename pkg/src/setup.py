from setuptools import find_packages, setup

entry_point = "freemal = freemal.__main__:main"


# get the dependencies and installs
with open("requirements.txt", encoding="utf-8") as f:
    # Make sure we strip all comments and options (e.g "--extra-index-url")
    # that arise from a modified pip.conf file that configure global options
    # when running kedro build-reqs
    requires = []
    for line in f:
        req = line.split("#", 1)[0].strip()
        if req and not req.startswith("--"):
            requires.append(req)

setup(
    name="freemal",
    version="0.1",
    packages=find_packages(exclude=["tests"]),
    entry_points={"console_scripts": [entry_point]},
    install_requires=requires,
    extras_require={
        "docs": [
            "mkdocs~=1.4.2",
            "mkdocstrings~=0.19.0",
            "markdown-include~=0.8.0",
            "mkdocs-material~=8.5.11",
            "mkdocstrings-python~=0.8.2",
        ],
        "dev": [
            "pytest~=7.4",
            "pytest-cov~=4.1",
            "hypothesis~=6.88",
            "black~=22.12",
            "flake8~=6.1",
            "pre-commit~=2.21",
        ],
    },
)
