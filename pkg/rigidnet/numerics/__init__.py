from . import numerics


__all__ = ["numerics"]
