from . import rigidity


__all__ = ["rigidity"]
