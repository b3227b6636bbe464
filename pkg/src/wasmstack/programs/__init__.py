"""Example programs shipped with the package."""

from importlib import resources

NAMES = ("calc.asm", "multidigit.asm", "divide.asm")


def source(name: str) -> str:
    return resources.files(__name__).joinpath(name).read_text(encoding="utf-8")
