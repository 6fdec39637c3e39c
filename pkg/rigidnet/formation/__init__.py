from . import formation


__all__ = ["formation"]
